use super::*;
use crate::comm::run_inproc;
use proptest::prelude::*;

fn dense(rows: usize, cols: usize, row_major: &[f64]) -> DenseArray<f64> {
    DenseArray::from_rows(rows, cols, row_major)
}

fn dist_from(c: &Communicator, full: &DenseArray<f64>) -> DistArray<f64> {
    let src = if c.is_root() {
        full.clone()
    } else {
        DenseArray::placeholder(full.ndim())
    };
    DistArray::distribute(c, &src, 0).unwrap()
}

#[test]
fn create_uses_block_widths() {
    let w = run_inproc(4, |c| DistArray::<f64>::new(&c, &[3, 7]).unwrap().local_shape());
    assert_eq!(w, vec![vec![3, 2], vec![3, 2], vec![3, 2], vec![3, 1]]);
    let w = run_inproc(2, |c| DistArray::<i64>::new(&c, &[5]).unwrap().local().len());
    assert_eq!(w, vec![3, 2]);
}

#[test]
fn distribute_vector_over_four() {
    let out = run_inproc(4, |c| {
        let src = if c.is_root() {
            DenseArray::vector(vec![1i64, 2, 3, 4])
        } else {
            DenseArray::placeholder(1)
        };
        DistArray::distribute(&c, &src, 0).unwrap().local().to_vec()
    });
    assert_eq!(out, vec![vec![1], vec![2], vec![3], vec![4]]);
}

#[test]
fn distribute_rejects_bad_placeholder() {
    let out = run_inproc(2, |c| {
        let src = if c.is_root() {
            DenseArray::<f64>::zeros(&[2, 3])
        } else {
            DenseArray::placeholder(1)
        };
        DistArray::distribute(&c, &src, 0).is_err()
    });
    assert_eq!(out, vec![true, true]);
}

#[test]
fn fill_and_sum() {
    let out = run_inproc(3, |c| {
        let mut a = DistArray::<f64>::new(&c, &[2, 3]).unwrap();
        a.fill(2.5);
        let s = a.sum().unwrap();
        a.fill(0.0);
        (s, a.sum().unwrap())
    });
    assert!(out.iter().all(|&x| x == (15.0, 0.0)));
}

#[test]
fn common_init_does_not_depend_on_rank_count() {
    let gather = |p| {
        run_inproc(p, |c| {
            let mut a = DistArray::<f64>::new(&c, &[3, 5]).unwrap();
            a.rand_fill(&RandFill::common(42)).unwrap();
            a.gather_full().unwrap()
        })
        .remove(0)
    };
    let one = gather(1);
    assert_eq!(one, gather(2));
    assert_eq!(one, gather(4));
    assert!(one.data().iter().all(|&x| (0.0..1.0).contains(&x)));
}

#[test]
fn rank_local_fill_uses_seed_plus_rank() {
    let out = run_inproc(2, |c| {
        let mut a = DistArray::<f64>::new(&c, &[4]).unwrap();
        a.rand_fill(&RandFill {
            seed: Some(7),
            ..Default::default()
        })
        .unwrap();
        a.local().to_vec()
    });
    for (rank, block) in out.iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(7 + rank as u64);
        let want: Vec<f64> = (0..2).map(|_| f64::sample_uniform(&mut rng)).collect();
        assert_eq!(*block, want);
    }
}

#[test]
fn replicated_column_plus_distributed_matrix() {
    let out = run_inproc(2, |c| {
        let a = DenseArray::vector(vec![1.0, 2.0]);
        let b = dist_from(&c, &dense(2, 2, &[3.0, 4.0, 5.0, 6.0]));
        let mut d = b.zeros_like();
        d.map_broadcast(&[Operand::Replicated(&a), Operand::Dist(&b)], |v| v[0] + v[1])
            .unwrap();
        d.gather_full().unwrap()
    });
    assert_eq!(out[0], dense(2, 2, &[4.0, 5.0, 7.0, 8.0]));
}

#[test]
fn singleton_row_operand_repeats() {
    let out = run_inproc(3, |c| {
        let row = dist_from(&c, &dense(1, 4, &[1.0, 2.0, 3.0, 4.0]));
        let mut d = DistArray::<f64>::new(&c, &[2, 4]).unwrap();
        d.map_broadcast(&[Operand::Dist(&row)], |v| v[0]).unwrap();
        d.gather_full().unwrap()
    });
    assert_eq!(out[1], dense(2, 4, &[1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0]));
}

#[test]
fn broadcast_error_cases() {
    let out = run_inproc(2, |c| {
        let mut d = DistArray::<f64>::new(&c, &[2, 4]).unwrap();
        let wide = DenseArray::<f64>::zeros(&[2, 4]);
        let bad_rows = DenseArray::<f64>::zeros(&[3, 1]);
        let col = dist_from(&c, &DenseArray::zeros(&[2, 1]));
        let vec1d = DistArray::<f64>::new(&c, &[4]).unwrap();
        (
            matches!(
                d.map_broadcast(&[Operand::Replicated(&wide)], |v| v[0]),
                Err(Error::Broadcast(_))
            ),
            d.map_broadcast(&[Operand::ReplicatedUnchecked(&wide)], |v| v[0])
                .is_ok(),
            matches!(
                d.map_broadcast(&[Operand::Replicated(&bad_rows)], |v| v[0]),
                Err(Error::Broadcast(_))
            ),
            matches!(
                d.map_broadcast(&[Operand::Dist(&col)], |v| v[0]),
                Err(Error::Distribution(_))
            ),
            matches!(
                d.map_broadcast(&[Operand::Dist(&vec1d)], |v| v[0]),
                Err(Error::Distribution(_))
            ),
        )
    });
    assert!(out.iter().all(|&x| x == (true, true, true, true, true)));
}

#[test]
fn unchecked_full_width_operand_reads_owned_columns() {
    let full = dense(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let out = run_inproc(2, |c| {
        let mut d = DistArray::<f64>::new(&c, &[2, 3]).unwrap();
        d.map_broadcast(&[Operand::ReplicatedUnchecked(&full), Operand::Scalar(10.0)], |v| {
            v[0] * v[1]
        })
        .unwrap();
        d.gather_full().unwrap()
    });
    assert_eq!(out[0], dense(2, 3, &[10.0, 20.0, 30.0, 40.0, 50.0, 60.0]));
}

#[test]
fn dest_operand_reads_current_value() {
    let out = run_inproc(2, |c| {
        let mut d = dist_from(&c, &dense(1, 3, &[1.0, 2.0, 3.0]));
        d.map_broadcast(&[Operand::Dest, Operand::Scalar(1.0)], |v| v[0] + v[1])
            .unwrap();
        d.map_inplace(|x| 2.0 * x);
        d.gather_full().unwrap().into_vec()
    });
    assert_eq!(out[0], vec![4.0, 6.0, 8.0]);
}

#[test]
fn three_dimensional_broadcast() {
    let full = DenseArray::<f64>::from_fn(&[2, 3, 5], |i| (i[0] + 10 * i[1] + 100 * i[2]) as f64);
    let mid = DenseArray::<f64>::from_fn(&[1, 3], |i| i[1] as f64 * 1000.0);
    let out = run_inproc(3, |c| {
        let src = if c.is_root() {
            full.clone()
        } else {
            DenseArray::placeholder(3)
        };
        let a = DistArray::distribute(&c, &src, 0).unwrap();
        let mut d = a.zeros_like();
        d.map_broadcast(&[Operand::Dist(&a), Operand::Replicated(&mid)], |v| v[0] + v[1])
            .unwrap();
        d.gather_full().unwrap()
    });
    let want = DenseArray::<f64>::from_fn(&[2, 3, 5], |i| full.get(i) + 1000.0 * i[1] as f64);
    assert_eq!(out[2], want);
}

#[test]
fn reduce_all_examples() {
    let out = run_inproc(3, |c| {
        let a = dist_from(&c, &DenseArray::vector(vec![1.0, 2.0, 3.0, 4.0]));
        let b = dist_from(&c, &DenseArray::vector(vec![1.0, -2.0]));
        (
            a.sum().unwrap(),
            b.sum_abs2().unwrap(),
            a.maximum().unwrap(),
            a.minimum().unwrap(),
        )
    });
    assert!(out.iter().all(|&x| x == (10.0, 5.0, 4.0, 1.0)));
    let out = run_inproc(2, |c| {
        let e = DistArray::<f64>::new(&c, &[3, 0]).unwrap();
        (e.maximum().is_err(), e.sum().unwrap())
    });
    assert!(out.iter().all(|&x| x == (true, 0.0)));
}

#[test]
fn reduce_dims_examples() {
    let out = run_inproc(2, |c| {
        let a = dist_from(&c, &dense(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let cols = a.sum_dims(&[0]).unwrap();
        let rows = a.sum_dims(&[1]).unwrap();
        let all = a.sum_dims(&[0, 1]).unwrap();
        assert!(matches!(cols, Reduced::Dist(_)));
        assert!(matches!(rows, Reduced::Replicated(_)));
        assert!(a.sum_dims(&[2]).is_err());
        assert!(a.sum_dims(&[]).is_err());
        (cols.gather().unwrap(), rows.gather().unwrap(), all.gather().unwrap())
    });
    let (cols, rows, all) = &out[1];
    assert_eq!(*cols, dense(1, 2, &[4.0, 6.0]));
    assert_eq!(*rows, dense(2, 1, &[3.0, 7.0]));
    assert_eq!(*all, dense(1, 1, &[10.0]));
}

#[test]
fn reduce_into_dispatches_on_target() {
    let full = dense(2, 4, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    let out = run_inproc(3, |c| {
        let a = dist_from(&c, &full);
        let mut colsum = DistArray::<f64>::new(&c, &[1, 4]).unwrap();
        reduce_into(ReduceTarget::Dist(&mut colsum), &a).unwrap();
        let mut rowsum = DenseArray::<f64>::zeros(&[2, 1]);
        reduce_into(ReduceTarget::Replicated(&mut rowsum), &a).unwrap();
        let mut total = DenseArray::<f64>::zeros(&[1, 1]);
        reduce_into(ReduceTarget::Replicated(&mut total), &a).unwrap();
        let mut bad = DenseArray::<f64>::zeros(&[3, 1]);
        assert!(reduce_into(ReduceTarget::Replicated(&mut bad), &a).is_err());
        (colsum.gather_full().unwrap(), rowsum, total)
    });
    for (colsum, rowsum, total) in out {
        assert_eq!(colsum, dense(1, 4, &[6.0, 8.0, 10.0, 12.0]));
        assert_eq!(rowsum, dense(2, 1, &[10.0, 26.0]));
        assert_eq!(total.data(), &[36.0]);
    }
}

#[test]
fn scan_examples() {
    let out = run_inproc(2, |c| {
        let v = dist_from(&c, &DenseArray::vector(vec![1.0, 2.0, 3.0]));
        let m = dist_from(&c, &dense(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        (
            v.cumsum(0).unwrap().gather_full().unwrap().into_vec(),
            m.cumsum(0).unwrap().gather_full().unwrap(),
            m.cumsum(1).unwrap().gather_full().unwrap(),
            m.cumprod(1).unwrap().gather_full().unwrap(),
        )
    });
    let (v, down, across, prod) = &out[0];
    assert_eq!(*v, vec![1.0, 3.0, 6.0]);
    assert_eq!(*down, dense(2, 2, &[1.0, 2.0, 4.0, 6.0]));
    assert_eq!(*across, dense(2, 2, &[1.0, 3.0, 3.0, 7.0]));
    assert_eq!(*prod, dense(2, 2, &[1.0, 2.0, 3.0, 12.0]));
}

#[test]
fn scan_with_empty_blocks() {
    let out = run_inproc(4, |c| {
        let v = DistArray::<i64>::from_local(&c, &[2], vec![5; [1, 1, 0, 0][c.rank()]]).unwrap();
        v.cumsum(0).unwrap().gather_full().unwrap().into_vec()
    });
    assert_eq!(out[3], vec![5, 10]);
}

#[test]
fn reshape_keeps_distribution() {
    let out = run_inproc(2, |c| {
        let v = dist_from(&c, &DenseArray::vector(vec![1.0, 2.0, 3.0]));
        let row = v.clone().reshape(&[1, 3]).unwrap();
        assert!(v.reshape(&[3, 1]).is_err());
        row.gather_full().unwrap()
    });
    assert_eq!(out[0], dense(1, 3, &[1.0, 2.0, 3.0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn round_trip(rows in 0usize..4, cols in 0usize..17, p in 1usize..9, seed: u64) {
        let full = DenseArray::<i64>::from_fn(&[rows, cols], |i| {
            (seed as i64).wrapping_mul(31).wrapping_add((i[0] * 17 + i[1]) as i64)
        });
        let out = run_inproc(p, |c| {
            let src = if c.is_root() { full.clone() } else { DenseArray::placeholder(2) };
            DistArray::distribute(&c, &src, 0).unwrap().gather_full().unwrap()
        });
        for g in out {
            prop_assert_eq!(&g, &full);
        }
    }
}

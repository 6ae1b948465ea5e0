use std::time::Duration;

use super::*;

fn both_backends<R: Send + std::fmt::Debug + PartialEq>(size: usize, f: impl Fn(Communicator) -> R + Sync) -> Vec<R> {
    let a = run_inproc(size, &f);
    let b = run_tcp_local(size, &f).unwrap();
    assert_eq!(a, b, "backends disagree");
    a
}

#[test]
fn init_inproc_enumerates_ranks() {
    let eps = init(&"inproc:4".parse().unwrap(), &TcpOptions::default()).unwrap();
    let ranks: Vec<_> = eps.iter().map(|e| (e.rank(), e.size())).collect();
    assert_eq!(ranks, vec![(0, 4), (1, 4), (2, 4), (3, 4)]);

    let solo = Communicator::solo();
    assert_eq!((solo.rank(), solo.size()), (0, 1));
}

#[test]
fn init_rejects_zero_ranks_and_garbage() {
    assert!(matches!("inproc:0".parse::<BackendSpec>(), Err(Error::Init(_))));
    assert!(matches!("mpi:4".parse::<BackendSpec>(), Err(Error::Init(_))));
    assert!(matches!("tcp:a:1,b:2".parse::<BackendSpec>(), Err(Error::Init(_))));
    assert!(matches!("tcp:a:1,rank=1".parse::<BackendSpec>(), Err(Error::Init(_))));
}

#[test]
fn backend_spec_round_trips() {
    for s in ["inproc:3", "tcp:127.0.0.1:4000,127.0.0.1:4001,rank=1"] {
        let spec: BackendSpec = s.parse().unwrap();
        assert_eq!(spec.to_string(), s);
    }
    let spec: BackendSpec = "tcp:h:1, h:2 ,rank=0".parse().unwrap();
    assert_eq!(spec.size(), 2);
}

#[test]
fn unreachable_peers_fail_to_initialize() {
    // TEST-NET-1 addresses are never routed
    let spec: BackendSpec = "tcp:192.0.2.1:9,192.0.2.2:9,rank=1".parse().unwrap();
    let opts = TcpOptions {
        connect_timeout: Duration::from_millis(300),
        io_timeout: None,
    };
    assert!(matches!(init(&spec, &opts), Err(Error::Init(_))));
    let spec: BackendSpec = "tcp:192.0.2.1:9,192.0.2.2:9,rank=0".parse().unwrap();
    assert!(matches!(init(&spec, &opts), Err(Error::Init(_))));
}

#[test]
fn broadcast_examples() {
    let out = both_backends(3, |c| {
        let mut buf = if c.rank() == 0 { [1i64, 2, 3] } else { [0; 3] };
        c.broadcast(&mut buf, 0).unwrap();
        buf
    });
    assert!(out.iter().all(|b| *b == [1, 2, 3]));

    let out = run_inproc(4, |c| {
        let mut buf = [if c.rank() == 2 { 9.0 } else { -1.0 }];
        c.broadcast(&mut buf, 2).unwrap();
        buf[0]
    });
    assert_eq!(out, vec![9.0; 4]);

    let c = Communicator::solo();
    let mut buf = [4.5f32, 1.0];
    c.broadcast(&mut buf, 0).unwrap();
    assert_eq!(buf, [4.5, 1.0]);
}

#[test]
fn allreduce_examples() {
    let out = both_backends(4, |c| {
        let mut buf = [c.rank() as i64 + 1];
        c.allreduce(&mut buf, ReduceOp::Sum).unwrap();
        buf[0]
    });
    assert_eq!(out, vec![10; 4]);

    let out = run_inproc(3, |c| {
        let mut buf = [[3.0, 7.0, 5.0][c.rank()]];
        c.allreduce(&mut buf, ReduceOp::Max).unwrap();
        buf[0]
    });
    assert_eq!(out, vec![7.0; 3]);

    let c = Communicator::solo();
    for op in [ReduceOp::Sum, ReduceOp::Product, ReduceOp::Max, ReduceOp::Min] {
        let mut buf = [2.0, -3.0];
        c.allreduce(&mut buf, op).unwrap();
        assert_eq!(buf, [2.0, -3.0]);
    }
}

#[test]
fn allreduce_folds_in_rank_order() {
    // 1e16 + 1 - 1e16 depends on association; rank order gives 0
    let vals = [1e16f64, 1.0, -1e16];
    let out = both_backends(3, |c| {
        let mut buf = [vals[c.rank()]];
        c.allreduce(&mut buf, ReduceOp::Sum).unwrap();
        buf[0].to_bits()
    });
    assert_eq!(out[0], ((1e16 + 1.0) - 1e16f64).to_bits());
}

#[test]
fn allgatherv_examples() {
    let out = both_backends(2, |c| {
        let send: Vec<f64> = if c.rank() == 0 { vec![1.0, 2.0] } else { vec![3.0] };
        let mut recv = [0.0; 3];
        c.allgatherv(&send, &mut recv, &[2, 1]).unwrap();
        recv
    });
    assert!(out.iter().all(|r| *r == [1.0, 2.0, 3.0]));

    let out = run_inproc(3, |c| {
        let r = c.rank() as i64;
        let mut recv = [0; 6];
        c.allgatherv(&[2 * r, 2 * r + 1], &mut recv, &[2, 2, 2]).unwrap();
        recv
    });
    assert!(out.iter().all(|r| *r == [0, 1, 2, 3, 4, 5]));

    let c = Communicator::solo();
    let mut recv = [0i64];
    c.allgatherv(&[5], &mut recv, &[1]).unwrap();
    assert_eq!(recv, [5]);
}

#[test]
fn scatterv_examples() {
    let out = both_backends(4, |c| {
        let send = if c.rank() == 0 { vec![1i64, 2, 3, 4] } else { Vec::new() };
        let mut recv = [0];
        c.scatterv(&send, &mut recv, &[1, 1, 1, 1], 0).unwrap();
        recv[0]
    });
    assert_eq!(out, vec![1, 2, 3, 4]);

    let out = run_inproc(2, |c| {
        let send = if c.rank() == 1 { vec![7.0, 8.0, 9.0] } else { Vec::new() };
        let mut recv = vec![0.0; [2, 1][c.rank()]];
        c.scatterv(&send, &mut recv, &[2, 1], 1).unwrap();
        recv
    });
    assert_eq!(out, vec![vec![7.0, 8.0], vec![9.0]]);

    let c = Communicator::solo();
    let mut recv = [0.0; 2];
    c.scatterv(&[1.5, 2.5], &mut recv, &[2], 0).unwrap();
    assert_eq!(recv, [1.5, 2.5]);
}

#[test]
fn barrier_interleaves_with_other_collectives() {
    let out = both_backends(4, |c| {
        c.barrier().unwrap();
        let mut buf = [1i64];
        c.allreduce(&mut buf, ReduceOp::Sum).unwrap();
        c.barrier().unwrap();
        buf[0]
    });
    assert_eq!(out, vec![4; 4]);
    Communicator::solo().barrier().unwrap();
}

#[test]
fn length_mismatch_is_a_contract_error_everywhere() {
    let out = both_backends(3, |c| {
        let mut buf = vec![1.0; if c.rank() == 1 { 2 } else { 3 }];
        matches!(c.allreduce(&mut buf, ReduceOp::Sum), Err(Error::Contract(_)))
    });
    assert_eq!(out, vec![true; 3]);

    let out = run_inproc(2, |c| {
        let mut buf = vec![0i64; c.rank() + 1];
        matches!(c.broadcast(&mut buf, 0), Err(Error::Contract(_)))
    });
    assert_eq!(out, vec![true; 2]);
}

#[test]
fn counts_disagreement_is_a_contract_error() {
    let out = both_backends(2, |c| {
        let counts = if c.rank() == 0 { [2, 1] } else { [1, 2] };
        let send = vec![1.0; counts[c.rank()]];
        let mut recv = [0.0; 3];
        matches!(c.allgatherv(&send, &mut recv, &counts), Err(Error::Contract(_)))
    });
    assert_eq!(out, vec![true; 2]);

    let out = run_inproc(2, |c| {
        let counts = if c.rank() == 0 { [1, 1] } else { [2, 0] };
        let send = vec![1i64, 2];
        let mut recv = vec![0; counts[c.rank()]];
        matches!(c.scatterv(&send, &mut recv, &counts, 0), Err(Error::Contract(_)))
    });
    assert_eq!(out, vec![true; 2]);
}

#[test]
fn world_survives_a_contract_error() {
    let out = run_inproc(2, |c| {
        let mut bad = vec![0.0; c.rank() + 1];
        assert!(c.allreduce(&mut bad, ReduceOp::Sum).is_err());
        let mut ok = [c.rank() as i64];
        c.allreduce(&mut ok, ReduceOp::Sum).unwrap();
        ok[0]
    });
    assert_eq!(out, vec![1, 1]);
}

#[test]
fn sequence_mismatch_is_detected() {
    let out = run_inproc(2, |c| {
        if c.rank() == 1 {
            // rank 1 skips a barrier, so its allreduce meets rank 0's barrier
            let mut buf = [1i64];
            return matches!(c.allreduce(&mut buf, ReduceOp::Sum), Err(Error::Contract(_)));
        }
        matches!(c.barrier(), Err(Error::Contract(_)))
    });
    assert_eq!(out, vec![true; 2]);
}

#[test]
fn element_type_mismatch_is_detected() {
    let out = run_inproc(2, |c| {
        if c.rank() == 0 {
            let mut buf = [1.0f64];
            c.allreduce(&mut buf, ReduceOp::Sum).is_err()
        } else {
            let mut buf = [1i64];
            c.allreduce(&mut buf, ReduceOp::Sum).is_err()
        }
    });
    assert_eq!(out, vec![true; 2]);
}

#[test]
fn concatenation_law() {
    let counts = [3usize, 0, 2, 1];
    let out = run_inproc(4, |c| {
        let r = c.rank();
        let send: Vec<f32> = (0..counts[r]).map(|i| (10 * r + i) as f32).collect();
        let mut recv = vec![0.0; 6];
        c.allgatherv(&send, &mut recv, &counts).unwrap();
        let off: usize = counts[..r].iter().sum();
        recv[off..off + counts[r]] == send[..]
    });
    assert!(out.into_iter().all(|x| x));
}

//! In-process ranks: one thread per rank, messages through per-rank mailboxes.

use std::sync::mpsc::{channel, Receiver, Sender};

use super::{Backend, Endpoint, Transport};
use crate::error::{Error, Result};

struct Link {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

/// Rank 0 holds a link to every other rank; the others only to rank 0.
struct Mailboxes {
    rank: usize,
    links: Vec<Option<Link>>,
}

impl Mailboxes {
    fn link(&mut self, peer: usize) -> Result<&mut Link> {
        let rank = self.rank;
        self.links
            .get_mut(peer)
            .and_then(Option::as_mut)
            .ok_or_else(|| Error::Transport(format!("rank {rank} has no mailbox for rank {peer}")))
    }
}

impl Transport for Mailboxes {
    fn send(&mut self, peer: usize, msg: Vec<u8>) -> Result<()> {
        self.link(peer)?
            .tx
            .send(msg)
            .map_err(|_| Error::Transport(format!("rank {peer} hung up")))
    }

    fn recv(&mut self, peer: usize) -> Result<Vec<u8>> {
        self.link(peer)?
            .rx
            .recv()
            .map_err(|_| Error::Transport(format!("rank {peer} hung up")))
    }
}

/// Create the endpoints of an in-process world of `size` ranks. Each endpoint
/// is meant to be moved to its own thread and turned into a
/// [`Communicator`](super::Communicator) there.
pub fn endpoints(size: usize) -> Result<Vec<Endpoint>> {
    if size == 0 {
        return Err(Error::Init("world size must be at least 1".into()));
    }
    let mut hub_links: Vec<Option<Link>> = (0..size).map(|_| None).collect();
    let mut others = Vec::with_capacity(size - 1);
    for (r, hub) in hub_links.iter_mut().enumerate().skip(1) {
        let (to_peer, peer_rx) = channel();
        let (to_hub, hub_rx) = channel();
        *hub = Some(Link {
            tx: to_peer,
            rx: hub_rx,
        });
        let mut links: Vec<Option<Link>> = (0..size).map(|_| None).collect();
        links[0] = Some(Link {
            tx: to_hub,
            rx: peer_rx,
        });
        others.push(Mailboxes { rank: r, links });
    }
    let mut eps = Vec::with_capacity(size);
    eps.push(Endpoint::new(
        0,
        size,
        Backend::InProcess,
        Box::new(Mailboxes {
            rank: 0,
            links: hub_links,
        }),
    ));
    for m in others {
        eps.push(Endpoint::new(m.rank, size, Backend::InProcess, Box::new(m)));
    }
    Ok(eps)
}

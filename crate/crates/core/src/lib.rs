//! 3D network layout, clustering, sampling and picking, plus the datagram protocol,
//! simulated network and job/session server behind a collaborative graph viewer.

pub mod community;
pub mod generators;
pub mod geom;
pub mod graph;
pub mod interaction;
pub mod layout;
pub mod netsim;
pub mod sampler;
pub mod protocol;
pub mod server;
pub mod spatial;

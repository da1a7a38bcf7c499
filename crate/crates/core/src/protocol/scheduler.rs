use std::collections::VecDeque;

use serde::Serialize;

use super::{Message, MsgType};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SendStats {
    pub sent: [u64; 4],
    /// Largest number of picks a type waited from becoming eligible to being sent,
    /// counting its own pick.
    pub max_gap: [u64; 4],
    pub overflow_dropped: [u64; 4],
}

impl SendStats {
    pub fn max_gap_of(&self, t: MsgType) -> u64 {
        self.max_gap[t.index()]
    }
}

/// Outbound queues per message type, drained least-recently-sent first.
#[derive(Debug)]
pub struct FairScheduler<T = Message> {
    queues: [VecDeque<T>; 4],
    last_sent: [Option<u64>; 4],
    eligible_since: [u64; 4],
    picks: u64,
    capacity: Option<usize>,
    stats: SendStats,
}

impl<T> Default for FairScheduler<T> {
    fn default() -> Self {
        FairScheduler {
            queues: Default::default(),
            last_sent: [None; 4],
            eligible_since: [0; 4],
            picks: 0,
            capacity: None,
            stats: SendStats::default(),
        }
    }
}

impl<T> FairScheduler<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bounds every queue; pushing onto a full queue drops its oldest entry.
    pub fn with_capacity_per_type(capacity: usize) -> Self {
        FairScheduler {
            capacity: Some(capacity.max(1)),
            ..Self::default()
        }
    }

    pub fn push(&mut self, t: MsgType, item: T) {
        let i = t.index();
        if self.queues[i].is_empty() {
            self.eligible_since[i] = self.picks;
        }
        if let Some(cap) = self.capacity {
            if self.queues[i].len() >= cap {
                self.queues[i].pop_front();
                self.stats.overflow_dropped[i] += 1;
            }
        }
        self.queues[i].push_back(item);
    }

    pub fn len(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.queues.iter().all(VecDeque::is_empty)
    }

    pub fn queued(&self, t: MsgType) -> usize {
        self.queues[t.index()].len()
    }

    pub fn active_types(&self) -> usize {
        self.queues.iter().filter(|q| !q.is_empty()).count()
    }

    pub fn stats(&self) -> &SendStats {
        &self.stats
    }

    /// Pops from the non-empty queue whose type was sent least recently (never-sent types
    /// first, ties to the lower type id).
    pub fn next_to_send(&mut self) -> Option<(MsgType, T)> {
        let t = MsgType::ALL
            .into_iter()
            .filter(|t| !self.queues[t.index()].is_empty())
            .min_by_key(|t| (self.last_sent[t.index()], *t as u8))?;
        let i = t.index();
        let item = self.queues[i].pop_front().expect("queue checked non-empty");
        let gap = self.picks - self.eligible_since[i] + 1;
        self.stats.max_gap[i] = self.stats.max_gap[i].max(gap);
        self.stats.sent[i] += 1;
        self.last_sent[i] = Some(self.picks);
        self.picks += 1;
        self.eligible_since[i] = self.picks;
        Some((t, item))
    }
}

impl FairScheduler<Message> {
    pub fn enqueue(&mut self, m: Message) {
        self.push(m.msg_type, m);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(t: MsgType, seq: u32) -> Message {
        Message::new(t, 0, seq, vec![])
    }

    #[test]
    fn empty_yields_none() {
        assert!(FairScheduler::<Message>::new().next_to_send().is_none());
    }

    #[test]
    fn least_recently_sent_wins() {
        let mut s = FairScheduler::new();
        s.enqueue(msg(MsgType::Pose, 0));
        s.enqueue(msg(MsgType::Transform, 0));
        s.enqueue(msg(MsgType::Transform, 1));
        // Neither sent yet: the lower type id goes first.
        assert_eq!(s.next_to_send().unwrap().0, MsgType::Pose);
        assert_eq!(s.next_to_send().unwrap().0, MsgType::Transform);
        s.enqueue(msg(MsgType::Pose, 1));
        assert_eq!(s.next_to_send().unwrap().0, MsgType::Pose);
        assert_eq!(s.next_to_send().unwrap().0, MsgType::Transform);
        assert!(s.is_empty());
    }

    #[test]
    fn flooded_type_cannot_starve_rare_one() {
        let mut s = FairScheduler::new();
        for i in 0..100 {
            s.enqueue(msg(MsgType::Pose, i));
        }
        s.enqueue(msg(MsgType::Highlight, 0));
        let first_two: Vec<_> = (0..2).map(|_| s.next_to_send().unwrap().0).collect();
        assert!(first_two.contains(&MsgType::Highlight));
    }

    #[test]
    fn every_active_type_served_within_k_picks() {
        let mut s = FairScheduler::new();
        for round in 0..200u32 {
            for (j, t) in MsgType::ALL.into_iter().enumerate() {
                for _ in 0..=(j * 5) {
                    s.enqueue(msg(t, round));
                }
            }
            for _ in 0..6 {
                s.next_to_send();
            }
        }
        for t in MsgType::ALL {
            assert!(s.stats().max_gap_of(t) <= 4, "{t}: {}", s.stats().max_gap_of(t));
        }
    }

    #[test]
    fn bounded_queue_drops_oldest() {
        let mut s = FairScheduler::with_capacity_per_type(2);
        for i in 0..5 {
            s.enqueue(msg(MsgType::Pose, i));
        }
        assert_eq!(s.queued(MsgType::Pose), 2);
        assert_eq!(s.next_to_send().unwrap().1.sequence, 3);
        assert_eq!(s.stats().overflow_dropped[0], 3);
    }
}

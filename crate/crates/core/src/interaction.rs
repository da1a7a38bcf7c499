//! Hand poses and the grab / scale / highlight state machine.
//!
//! A hand is nine points: a knuckle and a tip per finger plus the hand itself. Each finger is
//! open or closed depending on the angle between `tip − knuckle` and the palm-forward axis,
//! and the five bits form a [`PoseCode`]. The code picks a [`Mode`], and every frame the
//! client broadcasts its whole state rather than the change since the last frame.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::graph::{Graph, VertexId};
use crate::protocol::{
    HighlightPayload, Message, MsgType, PosePayload, PresencePayload, ProtocolError,
    SequenceCounters, StateStore, TransformPayload,
};
use crate::spatial::KdTree;

/// Below this angle (degrees) a finger commits to open.
pub const OPEN_BELOW_DEG: f64 = 80.0;
/// Above this angle (degrees) a finger commits to closed.
pub const CLOSED_ABOVE_DEG: f64 = 100.0;
/// Exponential drag gain of the scale gesture, per unit of hand travel.
pub const SCALE_GAIN: f64 = 2.0;

const FORWARD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum InteractionError {
    #[error("hand_forward must be a unit vector (norm {0})")]
    ForwardNotUnit(f64),
    #[error("non-finite joint position")]
    NonFinite,
    #[error("operation needs mode {expected:?}, state is {actual:?}")]
    WrongMode { expected: Mode, actual: Mode },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FingerFrame {
    pub knuckle: Vec3,
    pub tip: Vec3,
}

/// One tracked hand sample. Fingers run thumb to pinky.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandFrame {
    pub hand_position: Vec3,
    pub hand_forward: Vec3,
    pub fingers: [FingerFrame; 5],
    pub timestamp_ms: u64,
}

impl HandFrame {
    pub fn validate(&self) -> Result<(), InteractionError> {
        let pts = self
            .fingers
            .iter()
            .flat_map(|f| [f.knuckle, f.tip])
            .chain([self.hand_position, self.hand_forward]);
        for p in pts {
            if !p.is_finite() {
                return Err(InteractionError::NonFinite);
            }
        }
        let n = self.hand_forward.norm();
        if (n - 1.0).abs() > FORWARD_TOLERANCE {
            return Err(InteractionError::ForwardNotUnit(n));
        }
        Ok(())
    }

    /// Synthetic hand whose finger `i` makes `angles_deg[i]` with `forward`.
    ///
    /// Fingers fan out sideways from the hand position and bend towards an axis
    /// perpendicular to `forward`. `forward` is normalized here.
    pub fn from_angles(position: Vec3, forward: Vec3, angles_deg: [f64; 5], timestamp_ms: u64) -> Self {
        let fwd = forward.normalized().unwrap_or(Vec3::Z);
        let helper = if fwd.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        let side = fwd.cross(helper).normalized().expect("helper not parallel");
        let up = side.cross(fwd);
        let mut fingers = [FingerFrame::default(); 5];
        for (i, f) in fingers.iter_mut().enumerate() {
            let a = angles_deg[i].to_radians();
            let knuckle = position + side * (0.02 * (i as f64 - 2.0)) + fwd * 0.05;
            let dir = fwd * a.cos() + up * a.sin();
            *f = FingerFrame {
                knuckle,
                tip: knuckle + dir * 0.07,
            };
        }
        HandFrame {
            hand_position: position,
            hand_forward: fwd,
            fingers,
            timestamp_ms,
        }
    }

    /// Synthetic hand showing `code`: open fingers at 10°, closed ones at 170°.
    pub fn with_pose(position: Vec3, forward: Vec3, code: PoseCode, timestamp_ms: u64) -> Self {
        let angles = std::array::from_fn(|i| if code.is_open(i) { 10.0 } else { 170.0 });
        Self::from_angles(position, forward, angles, timestamp_ms)
    }

    pub fn index_tip(&self) -> Vec3 {
        self.fingers[1].tip
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FingerState {
    #[default]
    Open,
    Closed,
}

pub type FingerStates = [FingerState; 5];

/// Five finger bits, thumb in bit 0, set when open.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PoseCode(u8);

impl PoseCode {
    pub const FIST: PoseCode = PoseCode(0b00000);
    pub const POINT: PoseCode = PoseCode(0b00010);
    pub const PINCH: PoseCode = PoseCode(0b00011);
    pub const OPEN: PoseCode = PoseCode(0b11111);

    pub fn new(bits: u8) -> Option<Self> {
        (bits < 32).then_some(PoseCode(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn is_open(self, finger: usize) -> bool {
        self.0 >> finger & 1 == 1
    }

    pub fn from_states(states: &FingerStates) -> Self {
        let bits = states
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == FingerState::Open)
            .fold(0u8, |b, (i, _)| b | 1 << i);
        PoseCode(bits)
    }

    pub fn all() -> impl Iterator<Item = PoseCode> {
        (0..32).map(PoseCode)
    }
}

/// Angle test with a dead band between [`OPEN_BELOW_DEG`] and [`CLOSED_ABOVE_DEG`].
/// A zero-length finger keeps its previous state.
pub fn classify_finger(knuckle: Vec3, tip: Vec3, hand_forward: Vec3, prev: FingerState) -> FingerState {
    let Some(theta) = (tip - knuckle).angle_to(hand_forward) else {
        return prev;
    };
    let deg = theta.to_degrees();
    if deg < OPEN_BELOW_DEG {
        FingerState::Open
    } else if deg > CLOSED_ABOVE_DEG {
        FingerState::Closed
    } else {
        prev
    }
}

pub fn encode_pose(f: &HandFrame, prev: &FingerStates) -> (PoseCode, FingerStates) {
    let states: FingerStates = std::array::from_fn(|i| {
        classify_finger(f.fingers[i].knuckle, f.fingers[i].tip, f.hand_forward, prev[i])
    });
    (PoseCode::from_states(&states), states)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    Idle,
    Grabbing,
    Scaling,
}

/// Fist grabs, thumb plus index scales, everything else is idle.
pub fn pose_to_mode(code: PoseCode) -> Mode {
    match code {
        PoseCode::FIST => Mode::Grabbing,
        PoseCode::PINCH => Mode::Scaling,
        _ => Mode::Idle,
    }
}

/// Index finger alone points at vertices.
pub fn is_highlight_pose(code: PoseCode) -> bool {
    code == PoseCode::POINT
}

/// Uniform scale followed by translation: `p ↦ scale·p + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphTransform {
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for GraphTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl GraphTransform {
    pub const IDENTITY: GraphTransform = GraphTransform {
        translation: Vec3::ZERO,
        scale: 1.0,
    };

    pub fn apply(&self, p: Vec3) -> Vec3 {
        p * self.scale + self.translation
    }

    pub fn inverse_apply(&self, p: Vec3) -> Vec3 {
        (p - self.translation) / self.scale
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &GraphTransform) -> GraphTransform {
        GraphTransform {
            translation: inner.translation * self.scale + self.translation,
            scale: self.scale * inner.scale,
        }
    }

    pub fn to_payload(&self) -> TransformPayload {
        TransformPayload {
            translation: self.translation.to_array().map(|c| c as f32),
            scale: self.scale as f32,
        }
    }

    pub fn from_payload(p: &TransformPayload) -> Self {
        GraphTransform {
            translation: p.translation.map(f64::from).into(),
            scale: f64::from(p.scale),
        }
    }
}

/// Where and how a grab or scale gesture began.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub hand: Vec3,
    pub transform: GraphTransform,
    /// Drag direction of the scale gesture (unit).
    pub axis: Vec3,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionState {
    pub mode: Mode,
    /// Present exactly when `mode` is not idle.
    pub anchor: Option<Anchor>,
    pub current: GraphTransform,
    pub highlighted: Option<VertexId>,
}

impl InteractionState {
    /// Switches mode. Entering a gesture records the anchor; `graph_center` is the
    /// graph-local point whose world position defines the scale axis.
    pub fn enter(&self, mode: Mode, hand: Vec3, hand_forward: Vec3, graph_center: Vec3) -> Self {
        let anchor = match mode {
            Mode::Idle => None,
            _ => {
                let center = self.current.apply(graph_center);
                let axis = (hand - center)
                    .normalized()
                    .or_else(|| hand_forward.normalized())
                    .unwrap_or(Vec3::Z);
                Some(Anchor {
                    hand,
                    transform: self.current,
                    axis,
                })
            }
        };
        InteractionState {
            mode,
            anchor,
            ..self.clone()
        }
    }

    fn anchor_for(&self, expected: Mode) -> Result<Anchor, InteractionError> {
        match (self.mode == expected, self.anchor) {
            (true, Some(a)) => Ok(a),
            _ => Err(InteractionError::WrongMode {
                expected,
                actual: self.mode,
            }),
        }
    }
}

/// Translation follows the hand displacement since the gesture began.
pub fn apply_grab(s: &InteractionState, hand: Vec3) -> Result<InteractionState, InteractionError> {
    let a = s.anchor_for(Mode::Grabbing)?;
    Ok(InteractionState {
        current: GraphTransform {
            translation: a.transform.translation + (hand - a.hand),
            scale: a.transform.scale,
        },
        ..s.clone()
    })
}

pub fn scale_factor(anchor: &Anchor, hand: Vec3) -> f64 {
    (SCALE_GAIN * (hand - anchor.hand).dot(anchor.axis)).exp()
}

/// Scales about the anchor point by `exp(λ·(hand − anchor)·axis)`.
pub fn apply_scale(s: &InteractionState, hand: Vec3) -> Result<InteractionState, InteractionError> {
    let a = s.anchor_for(Mode::Scaling)?;
    let f = scale_factor(&a, hand);
    Ok(InteractionState {
        current: GraphTransform {
            translation: a.hand + (a.transform.translation - a.hand) * f,
            scale: a.transform.scale * f,
        },
        ..s.clone()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Highlight {
    pub vertex: VertexId,
    pub edges: Vec<(VertexId, VertexId)>,
    pub label: String,
}

/// Nearest vertex within `radius` of a graph-local fingertip, with its incident edges and
/// label (the vertex id when it has none).
pub fn update_highlight(g: &Graph, t: &KdTree, fingertip: Vec3, radius: f64) -> Option<Highlight> {
    let hit = t.nearest_within(fingertip, radius)?;
    let v = hit.id;
    let edges = g.neighbors(v).iter().map(|&u| (v, u)).collect();
    let label = g.meta(v).label.clone().unwrap_or_else(|| g.id(v).to_string());
    Some(Highlight {
        vertex: v,
        edges,
        label,
    })
}

/// Per-client frame loop: poses in, full-state messages out.
#[derive(Clone, Debug)]
pub struct ClientSession {
    pub client_id: u16,
    pub state: InteractionState,
    pub fingers: FingerStates,
    pub pose: PoseCode,
    /// World-space pick radius.
    pub highlight_radius: f64,
    /// Graph-local center used to orient the scale gesture.
    pub graph_center: Vec3,
    pub head: Option<PresencePayload>,
    seq: SequenceCounters,
}

impl ClientSession {
    pub fn new(client_id: u16) -> Self {
        ClientSession {
            client_id,
            state: InteractionState::default(),
            fingers: [FingerState::Open; 5],
            pose: PoseCode::OPEN,
            highlight_radius: 0.05,
            graph_center: Vec3::ZERO,
            head: None,
            seq: SequenceCounters::default(),
        }
    }

    pub fn with_sequence_start(mut self, seq: u32) -> Self {
        self.seq = SequenceCounters::starting_at(seq);
        self
    }

    /// Processes one frame and returns this frame's TRANSFORM, POSE and HIGHLIGHT messages
    /// (plus PRESENCE when a head pose is set). `scene` enables picking.
    pub fn step(&mut self, f: &HandFrame, scene: Option<(&Graph, &KdTree)>) -> Vec<Message> {
        let (code, fingers) = encode_pose(f, &self.fingers);
        self.fingers = fingers;
        self.pose = code;

        let mode = pose_to_mode(code);
        if mode != self.state.mode {
            self.state = self
                .state
                .enter(mode, f.hand_position, f.hand_forward, self.graph_center);
        }
        self.state = match mode {
            Mode::Grabbing => apply_grab(&self.state, f.hand_position),
            Mode::Scaling => apply_scale(&self.state, f.hand_position),
            Mode::Idle => Ok(self.state.clone()),
        }
        .expect("mode was just entered");

        self.state.highlighted = match scene {
            Some((g, t)) if is_highlight_pose(code) => {
                let local = self.state.current.inverse_apply(f.index_tip());
                let r = self.highlight_radius / self.state.current.scale;
                update_highlight(g, t, local, r).map(|h| h.vertex)
            }
            _ => None,
        };
        self.messages(f)
    }

    /// Copy of `m` under this client's next sequence for its type, for sending the same state
    /// again within a frame.
    pub fn restamp(&mut self, m: &Message) -> Message {
        Message::new(m.msg_type, self.client_id, self.seq.next(m.msg_type), m.payload.clone())
    }

    fn messages(&mut self, f: &HandFrame) -> Vec<Message> {
        let id = self.client_id;
        let f32s = |v: Vec3| v.to_array().map(|c| c as f32);
        let pose = PosePayload {
            hand_position: f32s(f.hand_position),
            hand_forward: f32s(f.hand_forward),
            pose_code: self.pose.bits(),
            fingers: f.fingers.map(|fi| (f32s(fi.knuckle), f32s(fi.tip))),
        };
        let highlight = HighlightPayload {
            vertex: self.state.highlighted.map(|v| v.0),
        };
        let mut out = vec![
            Message::new(
                MsgType::Transform,
                id,
                self.seq.next(MsgType::Transform),
                self.state.current.to_payload().encode(),
            ),
            Message::new(MsgType::Pose, id, self.seq.next(MsgType::Pose), pose.encode()),
            Message::new(
                MsgType::Highlight,
                id,
                self.seq.next(MsgType::Highlight),
                highlight.encode(),
            ),
        ];
        if let Some(h) = self.head {
            out.push(Message::new(
                MsgType::Presence,
                id,
                self.seq.next(MsgType::Presence),
                h.encode(),
            ));
        }
        out
    }
}

/// What another participant knows about one client, rebuilt from its latest messages.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RemoteView {
    pub transform: Option<GraphTransform>,
    pub pose: Option<PoseCode>,
    pub highlighted: Option<VertexId>,
    pub head: Option<PresencePayload>,
}

impl RemoteView {
    /// Overwrites the field the message describes; nothing else is consulted.
    pub fn apply(&mut self, m: &Message) -> Result<(), InteractionError> {
        match m.msg_type {
            MsgType::Transform => {
                self.transform = Some(GraphTransform::from_payload(&TransformPayload::decode(&m.payload)?));
            }
            MsgType::Pose => {
                let p = PosePayload::decode(&m.payload)?;
                self.pose = PoseCode::new(p.pose_code & 0x1F);
            }
            MsgType::Highlight => {
                self.highlighted = HighlightPayload::decode(&m.payload)?.vertex.map(VertexId);
            }
            MsgType::Presence => self.head = Some(PresencePayload::decode(&m.payload)?),
        }
        Ok(())
    }

    pub fn from_store(store: &StateStore, client: u16) -> Result<Self, InteractionError> {
        let mut v = RemoteView::default();
        for t in MsgType::ALL {
            if let Some(m) = store.get(client, t) {
                v.apply(m)?;
            }
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn finger_at(deg: f64) -> (Vec3, Vec3) {
        let a = deg.to_radians();
        (Vec3::ZERO, Vec3::new(a.sin(), 0.0, a.cos()))
    }

    #[test]
    fn classify_extremes() {
        let (k, t) = finger_at(0.0);
        assert_eq!(classify_finger(k, t, Vec3::Z, FingerState::Closed), FingerState::Open);
        let (k, t) = finger_at(180.0);
        assert_eq!(classify_finger(k, t, Vec3::Z, FingerState::Open), FingerState::Closed);
        assert_eq!(classify_finger(k, k, Vec3::Z, FingerState::Closed), FingerState::Closed);
    }

    #[test]
    fn dead_band_oscillation_keeps_state() {
        let mut s = FingerState::Open;
        for i in 0..100 {
            let (k, t) = finger_at(if i % 2 == 0 { 88.0 } else { 92.0 });
            s = classify_finger(k, t, Vec3::Z, s);
            assert_eq!(s, FingerState::Open);
        }
        let (k, t) = finger_at(101.0);
        s = classify_finger(k, t, Vec3::Z, s);
        let (k, t) = finger_at(85.0);
        assert_eq!(classify_finger(k, t, Vec3::Z, s), FingerState::Closed);
    }

    #[test]
    fn pose_examples() {
        let prev = [FingerState::Open; 5];
        let f = HandFrame::from_angles(Vec3::ZERO, Vec3::X, [5.0; 5], 0);
        assert_eq!(encode_pose(&f, &prev).0.bits(), 31);
        let f = HandFrame::from_angles(Vec3::ZERO, Vec3::X, [175.0; 5], 0);
        assert_eq!(encode_pose(&f, &prev).0.bits(), 0);
        let f = HandFrame::from_angles(Vec3::ZERO, Vec3::Y, [170.0, 10.0, 170.0, 170.0, 170.0], 0);
        assert_eq!(encode_pose(&f, &prev).0.bits(), 0b00010);
    }

    #[test]
    fn every_code_reachable() {
        for code in PoseCode::all() {
            let f = HandFrame::with_pose(Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.3, -0.2, 0.9), code, 0);
            f.validate().unwrap();
            // Start from the opposite state so nothing is inherited from memory.
            let prev = std::array::from_fn(|i| if code.is_open(i) { FingerState::Closed } else { FingerState::Open });
            assert_eq!(encode_pose(&f, &prev).0, code);
        }
    }

    #[test]
    fn mode_table() {
        assert_eq!(pose_to_mode(PoseCode::new(0).unwrap()), Mode::Grabbing);
        assert_eq!(pose_to_mode(PoseCode::new(3).unwrap()), Mode::Scaling);
        assert_eq!(pose_to_mode(PoseCode::new(31).unwrap()), Mode::Idle);
        assert_eq!(pose_to_mode(PoseCode::new(2).unwrap()), Mode::Idle);
        assert!(is_highlight_pose(PoseCode::new(2).unwrap()));
        assert!(PoseCode::new(32).is_none());
    }

    #[test]
    fn transform_compose_and_inverse() {
        let a = GraphTransform { translation: Vec3::new(1.0, 2.0, 3.0), scale: 2.0 };
        let b = GraphTransform { translation: Vec3::new(-1.0, 0.5, 0.0), scale: 0.25 };
        let c = GraphTransform { translation: Vec3::new(0.0, 0.0, 4.0), scale: 3.0 };
        let p = Vec3::new(0.3, -0.7, 1.1);
        assert!((a.compose(&b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
        let l = a.compose(&b).compose(&c);
        let r = a.compose(&b.compose(&c));
        assert!((l.translation - r.translation).norm() < 1e-12 && (l.scale - r.scale).abs() < 1e-12);
        assert!((a.inverse_apply(a.apply(p)) - p).norm() < 1e-12);
    }

    fn grabbing(at: Vec3) -> InteractionState {
        InteractionState::default().enter(Mode::Grabbing, at, Vec3::Z, Vec3::ZERO)
    }

    #[test]
    fn grab_examples() {
        let anchor = Vec3::new(0.5, 0.5, 0.5);
        let s = grabbing(anchor);
        assert_eq!(apply_grab(&s, anchor).unwrap().current, GraphTransform::IDENTITY);
        let moved = apply_grab(&s, anchor + Vec3::X).unwrap();
        assert_eq!(moved.current.translation, Vec3::X);

        let target = anchor + Vec3::new(0.3, -0.1, 0.2);
        let two = apply_grab(&apply_grab(&s, anchor + Vec3::Y).unwrap(), target).unwrap();
        assert_eq!(two.current, apply_grab(&s, target).unwrap().current);

        assert!(matches!(
            apply_scale(&s, anchor),
            Err(InteractionError::WrongMode { expected: Mode::Scaling, .. })
        ));
    }

    #[test]
    fn scale_examples() {
        let anchor = Vec3::new(1.0, 0.0, 0.0);
        let s = InteractionState::default().enter(Mode::Scaling, anchor, Vec3::Z, Vec3::ZERO);
        assert_eq!(s.anchor.unwrap().axis, Vec3::X);
        assert_eq!(apply_scale(&s, anchor).unwrap().current, GraphTransform::IDENTITY);
        let grown = apply_scale(&s, anchor + Vec3::new(0.5, 0.3, 0.0)).unwrap();
        assert!((grown.current.scale - std::f64::consts::E).abs() < 1e-12);
        assert!((grown.current.apply(anchor) - anchor).norm() < 1e-9);

        // Anchor on the graph center falls back to the palm axis.
        let s = InteractionState::default().enter(Mode::Scaling, Vec3::ZERO, Vec3::Y, Vec3::ZERO);
        assert_eq!(s.anchor.unwrap().axis, Vec3::Y);
    }

    #[test]
    fn scale_fixed_point_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut v = || Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        for _ in 0..500 {
            let start = GraphTransform { translation: v(), scale: 0.5 };
            let base = InteractionState { current: start, ..Default::default() };
            let anchor = v();
            let s = base.enter(Mode::Scaling, anchor, Vec3::Z, v());
            let hand = anchor + v() * 0.2;
            let out = apply_scale(&s, hand).unwrap();
            let local = start.inverse_apply(anchor);
            assert!((out.current.apply(local) - anchor).norm() < 1e-9);
        }
    }

    fn hub_graph() -> (Graph, KdTree) {
        let g = generators::star(5);
        let mut pos = vec![Vec3::ZERO];
        for i in 1..6 {
            pos.push(Vec3::new(i as f64, 0.0, 0.0));
        }
        (g, KdTree::from_positions(&pos))
    }

    #[test]
    fn highlight_examples() {
        let (g, t) = hub_graph();
        assert!(update_highlight(&g, &t, Vec3::new(0.0, 50.0, 0.0), 0.1).is_none());
        let h = update_highlight(&g, &t, Vec3::new(0.01, 0.0, 0.0), 0.1).unwrap();
        assert_eq!(h.vertex, VertexId(0));
        let mut want: Vec<_> = g.neighbors(VertexId(0)).iter().map(|&u| (VertexId(0), u)).collect();
        want.sort();
        let mut got = h.edges.clone();
        got.sort();
        assert_eq!(got, want);
        assert_eq!(got.len(), 5);
        assert_eq!(h.label, g.id(VertexId(0)));

        let (g, _) = crate::graph::Graph::from_edges(3, [(0, 1)]).unwrap();
        let t = KdTree::from_positions(&[Vec3::ZERO, Vec3::X, Vec3::new(5.0, 5.0, 5.0)]);
        let h = update_highlight(&g, &t, Vec3::new(5.0, 5.0, 5.0), 0.1).unwrap();
        assert_eq!((h.vertex, h.edges.len()), (VertexId(2), 0));
    }

    fn fist(x: f64, t: u64) -> HandFrame {
        HandFrame::with_pose(Vec3::new(x, 0.0, 0.0), Vec3::Z, PoseCode::FIST, t)
    }

    #[test]
    fn fist_drag_accumulates_displacement() {
        let mut c = ClientSession::new(1);
        for (i, x) in [0.0, 0.1, 0.25].into_iter().enumerate() {
            c.step(&fist(x, i as u64), None);
        }
        assert_eq!(c.state.mode, Mode::Grabbing);
        assert!((c.state.current.translation - Vec3::new(0.25, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn open_hand_still_broadcasts() {
        let mut c = ClientSession::new(4);
        let f = HandFrame::with_pose(Vec3::ZERO, Vec3::Z, PoseCode::OPEN, 0);
        let first = c.step(&f, None);
        let before = c.state.clone();
        for _ in 0..5 {
            let msgs = c.step(&f, None);
            assert_eq!(msgs.len(), 3);
            assert_eq!(c.state, before);
            for (a, b) in msgs.iter().zip(&first) {
                assert_eq!((a.msg_type, &a.payload), (b.msg_type, &b.payload));
            }
        }
        c.head = Some(PresencePayload::default());
        assert_eq!(c.step(&f, None).len(), 4);
    }

    #[test]
    fn last_message_alone_rebuilds_state() {
        let (g, t) = hub_graph();
        let mut c = ClientSession::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let codes = [PoseCode::FIST, PoseCode::PINCH, PoseCode::POINT, PoseCode::OPEN];
        let mut all = Vec::new();
        let mut code = PoseCode::OPEN;
        for i in 0..300 {
            if i % 20 == 0 {
                code = codes[rng.random_range(0..4)];
            }
            let p = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 0.0);
            let f = HandFrame::with_pose(p, Vec3::Z, code, i);
            all.extend(c.step(&f, Some((&g, &t))));
        }
        // Keep a lossy, shuffled subset plus the last message of each type.
        let mut kept: Vec<Message> = all.iter().filter(|_| rng.random_bool(0.3)).cloned().collect();
        kept.extend(all.iter().rev().take(3).cloned());
        for i in (1..kept.len()).rev() {
            kept.swap(i, rng.random_range(0..=i));
        }
        let mut store = StateStore::new();
        for m in kept {
            store.merge(m);
        }
        let view = RemoteView::from_store(&store, 2).unwrap();
        assert_eq!(view.transform.unwrap().to_payload(), c.state.current.to_payload());
        assert_eq!(view.highlighted, c.state.highlighted);
        assert_eq!(view.pose, Some(c.pose));
    }

    #[test]
    fn pointing_highlights_through_transform() {
        let (g, t) = hub_graph();
        let mut c = ClientSession::new(1);
        c.state.current = GraphTransform { translation: Vec3::new(10.0, 0.0, 0.0), scale: 2.0 };
        let f = HandFrame::with_pose(Vec3::ZERO, Vec3::Z, PoseCode::POINT, 0);
        // Put the index tip on vertex 2, which sits at world x = 14.
        let shift = Vec3::new(14.0, 0.0, 0.0) - f.index_tip();
        let mut f2 = f;
        f2.hand_position += shift;
        for fi in &mut f2.fingers {
            fi.knuckle += shift;
            fi.tip += shift;
        }
        c.step(&f2, Some((&g, &t)));
        assert_eq!(c.state.highlighted, Some(VertexId(2)));
        c.step(&HandFrame::with_pose(Vec3::ZERO, Vec3::Z, PoseCode::OPEN, 1), Some((&g, &t)));
        assert_eq!(c.state.highlighted, None);
    }
}

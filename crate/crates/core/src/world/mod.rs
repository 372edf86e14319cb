//! World model: the factor-graph data structures, measurement ingestion,
//! track association, and the time-based sliding window.
//!
//! Nodes encode the ego vehicle's poses (`Av`), point objects (`Landmark`),
//! and line features (`Line`) holding an ordered sequence of sampled points.
//! Edges encode spatial constraints with information matrices. Mutation goes
//! through [`FactorGraph`] methods; read-only [`WorldSnapshot`]s are taken for
//! drivability evaluation and planning.

pub mod io;

use crate::se2::Pose2;
use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("covariance matrix is not positive-definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("timestamp {t:.3} not after previous pose timestamp {prev:.3}")]
    NonMonotoneTimestamp { t: f64, prev: f64 },
    #[error("node {0:?} does not exist")]
    UnknownNode(NodeId),
    #[error("node {0:?} is not an AV pose")]
    NotAPose(NodeId),
    #[error("line observation needs at least 4 points, got {0}")]
    TooFewLinePoints(usize),
    #[error("graph deserialization failed: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u64);

/// Semantic class of a detected object, as supplied by the upstream fusion
/// layer (or the scenario simulator standing in for it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemanticClass {
    StaticObstacle,
    MovingVehicle,
    ConeLandmark,
    SolidLaneLine,
    DashedLaneLine,
    ObservedDriveRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticInfo {
    pub class: SemanticClass,
    /// (length, width) in meters, for classes with a bounding box.
    pub extent: Option<(f64, f64)>,
    /// Stable id across observations of the same physical object.
    pub track_id: u64,
}

impl SemanticInfo {
    pub fn new(class: SemanticClass, extent: Option<(f64, f64)>, track_id: u64) -> Self {
        if let Some((l, w)) = extent {
            assert!(l > 0.0 && w > 0.0, "extent components must be positive");
        }
        Self {
            class,
            extent,
            track_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    #[serde(rename = "AV")]
    Av,
    #[serde(rename = "LM")]
    Landmark,
    #[serde(rename = "LL")]
    Line,
}

/// One sampled point of a line feature, kept with its observation time and
/// observing pose so the sliding window can retire it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinePoint {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub timestamp: f64,
    pub observed_from: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeState {
    Pose { x: f64, y: f64, theta: f64 },
    Point { x: f64, y: f64 },
    LinePoints(Vec<LinePoint>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub state: NodeState,
    /// Orientation for point objects, estimated from track motion; AV poses
    /// carry their heading in the state, line features none at all.
    pub heading: Option<f64>,
    pub semantics: Option<SemanticInfo>,
    pub timestamp: f64,
}

impl Node {
    pub fn pose(&self) -> Option<Pose2> {
        match self.state {
            NodeState::Pose { x, y, theta } => Some(Pose2::new(x, y, theta)),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<(f64, f64)> {
        match self.state {
            NodeState::Point { x, y } => Some((x, y)),
            _ => None,
        }
    }

    pub fn line_points(&self) -> Option<&[LinePoint]> {
        match &self.state {
            NodeState::LinePoints(p) => Some(p),
            _ => None,
        }
    }
}

/// Measurement edge. Information matrices are inverses of the measurement
/// covariances and are validated positive-definite at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Edge {
    /// Relative pose constraint between consecutive AV poses (dx, dy, dtheta
    /// in the `from` frame).
    Odometry {
        from: NodeId,
        to: NodeId,
        delta: [f64; 3],
        information: [[f64; 3]; 3],
    },
    /// Relative position of a landmark in the observing pose's frame.
    LandmarkObservation {
        pose: NodeId,
        landmark: NodeId,
        relative: [f64; 2],
        information: [[f64; 2]; 2],
    },
    /// Relative positions of the line points contributed by one observation,
    /// in the observing pose's frame. `points` pairs each line-point id with
    /// its measured body-frame position.
    LineObservation {
        pose: NodeId,
        line: NodeId,
        points: Vec<(u64, [f64; 2])>,
        information: [[f64; 2]; 2],
    },
    /// Implicit-function factor over all accumulated points of one line
    /// feature. `weight` is the square root of the scalar information applied
    /// to every residual component.
    LineConsistency { line: NodeId, weight: f64 },
    /// Anchor on an AV pose at a fixed value.
    Prior {
        node: NodeId,
        anchor: [f64; 3],
        information: [[f64; 3]; 3],
    },
}

impl Edge {
    /// Node ids this edge references.
    pub fn node_ids(&self) -> Vec<NodeId> {
        match self {
            Edge::Odometry { from, to, .. } => vec![*from, *to],
            Edge::LandmarkObservation { pose, landmark, .. } => vec![*pose, *landmark],
            Edge::LineObservation { pose, line, .. } => vec![*pose, *line],
            Edge::LineConsistency { line, .. } => vec![*line],
            Edge::Prior { node, .. } => vec![*node],
        }
    }
}

fn check_pd3(m: &Matrix3<f64>) -> Result<(), WorldError> {
    let sym = (m + m.transpose()) * 0.5;
    let min = sym.symmetric_eigen().eigenvalues.min();
    if min <= 0.0 {
        return Err(WorldError::NotPositiveDefinite(min));
    }
    Ok(())
}

fn check_pd2(m: &Matrix2<f64>) -> Result<(), WorldError> {
    let sym = (m + m.transpose()) * 0.5;
    let min = sym.symmetric_eigen().eigenvalues.min();
    if min <= 0.0 {
        return Err(WorldError::NotPositiveDefinite(min));
    }
    Ok(())
}

fn mat3_to_array(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

fn mat2_to_array(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

pub fn array_to_mat3(a: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| a[i][j])
}

pub fn array_to_mat2(a: &[[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::from_fn(|i, j| a[i][j])
}

/// One observed map-frame sample of a tracked object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
}

/// Bookkeeping for one upstream track id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub node: NodeId,
    pub class: SemanticClass,
    pub extent: Option<(f64, f64)>,
    /// Observed map-frame positions, oldest first.
    pub samples: Vec<TrackSample>,
}

impl Track {
    /// Speed estimate from the two most recent observations, m/s.
    pub fn speed(&self) -> Option<f64> {
        let n = self.samples.len();
        if n < 2 {
            return None;
        }
        let (a, b) = (&self.samples[n - 2], &self.samples[n - 1]);
        let dt = b.timestamp - a.timestamp;
        if dt <= 0.0 {
            return None;
        }
        Some(((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt() / dt)
    }

    /// Heading of the most recent displacement, if the track has moved enough
    /// for the direction to be meaningful.
    pub fn heading(&self) -> Option<f64> {
        for w in self.samples.windows(2).rev() {
            let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
            if dx.hypot(dy) > 0.05 {
                return Some(dy.atan2(dx));
            }
        }
        None
    }
}

/// Anchoring strength used when re-anchoring the window after pruning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub window_duration: f64,
    pub prior_position_sigma: f64,
    pub prior_heading_sigma: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            window_duration: 10.0,
            prior_position_sigma: 1e-3,
            prior_heading_sigma: 1e-3,
        }
    }
}

/// The optimization graph: typed nodes, measurement edges, track registry,
/// and the sliding-window bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorGraph {
    nodes: BTreeMap<NodeId, Node>,
    edges: Vec<Edge>,
    pub config: GraphConfig,
    tracks: BTreeMap<u64, Track>,
    next_node_id: u64,
    next_point_id: u64,
    latest_pose: Option<NodeId>,
}

impl FactorGraph {
    pub fn new(config: GraphConfig) -> Self {
        Self {
            nodes: BTreeMap::new(),
            edges: Vec::new(),
            config,
            tracks: BTreeMap::new(),
            next_node_id: 0,
            next_point_id: 0,
            latest_pose: None,
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut Node> {
        self.nodes.get_mut(&id)
    }

    pub fn tracks(&self) -> &BTreeMap<u64, Track> {
        &self.tracks
    }

    pub fn latest_pose_id(&self) -> Option<NodeId> {
        self.latest_pose
    }

    pub fn latest_pose(&self) -> Option<Pose2> {
        self.latest_pose.and_then(|id| self.nodes[&id].pose())
    }

    fn alloc_node_id(&mut self) -> NodeId {
        let id = NodeId(self.next_node_id);
        self.next_node_id += 1;
        id
    }

    /// Append a new AV pose, initialized by composing the previous pose with
    /// the odometry delta, and connect it with an odometry edge.
    pub fn add_pose(
        &mut self,
        timestamp: f64,
        odometry_delta: Pose2,
        covariance: &Matrix3<f64>,
    ) -> Result<NodeId, WorldError> {
        check_pd3(covariance)?;
        if let Some(prev_id) = self.latest_pose {
            let prev_t = self.nodes[&prev_id].timestamp;
            if timestamp <= prev_t {
                return Err(WorldError::NonMonotoneTimestamp {
                    t: timestamp,
                    prev: prev_t,
                });
            }
        }
        let information = covariance
            .cholesky()
            .ok_or(WorldError::NotPositiveDefinite(0.0))?
            .inverse();

        let prev = self.latest_pose;
        let pose = match prev {
            Some(id) => self.nodes[&id].pose().unwrap().compose(&odometry_delta),
            None => Pose2::identity().compose(&odometry_delta),
        };
        let id = self.alloc_node_id();
        self.nodes.insert(
            id,
            Node {
                id,
                kind: NodeKind::Av,
                state: NodeState::Pose {
                    x: pose.x,
                    y: pose.y,
                    theta: pose.theta,
                },
                heading: None,
                semantics: None,
                timestamp,
            },
        );
        match prev {
            Some(prev_id) => self.edges.push(Edge::Odometry {
                from: prev_id,
                to: id,
                delta: [odometry_delta.x, odometry_delta.y, odometry_delta.theta],
                information: mat3_to_array(&information),
            }),
            None => {
                // First pose: anchor it so the graph is determined.
                self.add_prior(id, pose);
            }
        }
        self.latest_pose = Some(id);
        Ok(id)
    }

    fn add_prior(&mut self, id: NodeId, at: Pose2) {
        let info = Matrix3::from_diagonal(&nalgebra::Vector3::new(
            self.config.prior_position_sigma.powi(-2),
            self.config.prior_position_sigma.powi(-2),
            self.config.prior_heading_sigma.powi(-2),
        ));
        self.edges.push(Edge::Prior {
            node: id,
            anchor: [at.x, at.y, at.theta],
            information: mat3_to_array(&info),
        });
    }

    /// Ingest a landmark observation: relative position of the object in the
    /// observing pose's frame. Observations of a known track attach to its
    /// node; unknown tracks create one, initialized at pose ⊕ relative.
    ///
    /// Moving vehicles are kept as single-constraint tracks: a fresh
    /// observation supersedes the previous one (the node follows the latest
    /// observed position) and the superseded position is appended to the
    /// track's trail history instead.
    pub fn observe_landmark(
        &mut self,
        pose_id: NodeId,
        relative: (f64, f64),
        covariance: &Matrix2<f64>,
        semantics: SemanticInfo,
    ) -> Result<NodeId, WorldError> {
        check_pd2(covariance)?;
        let pose = self
            .nodes
            .get(&pose_id)
            .ok_or(WorldError::UnknownNode(pose_id))?
            .pose()
            .ok_or(WorldError::NotAPose(pose_id))?;
        let timestamp = self.nodes[&pose_id].timestamp;
        let information = covariance
            .cholesky()
            .ok_or(WorldError::NotPositiveDefinite(0.0))?
            .inverse();
        let (mx, my) = pose.transform(relative.0, relative.1);

        let track_id = semantics.track_id;
        let node_id = match self.tracks.get(&track_id) {
            Some(track) if self.nodes.contains_key(&track.node) => track.node,
            _ => {
                let id = self.alloc_node_id();
                self.nodes.insert(
                    id,
                    Node {
                        id,
                        kind: NodeKind::Landmark,
                        state: NodeState::Point { x: mx, y: my },
                        heading: None,
                        semantics: Some(semantics.clone()),
                        timestamp,
                    },
                );
                self.tracks.insert(
                    track_id,
                    Track {
                        node: id,
                        class: semantics.class,
                        extent: semantics.extent,
                        samples: Vec::new(),
                    },
                );
                id
            }
        };

        if semantics.class == SemanticClass::MovingVehicle {
            // Drop the superseded constraint and move the node to the latest
            // observed position; a moving object must not be triangulated
            // across time.
            self.edges.retain(|e| {
                !matches!(e, Edge::LandmarkObservation { landmark, .. } if *landmark == node_id)
            });
            if let Some(node) = self.nodes.get_mut(&node_id) {
                node.state = NodeState::Point { x: mx, y: my };
            }
        }

        self.edges.push(Edge::LandmarkObservation {
            pose: pose_id,
            landmark: node_id,
            relative: [relative.0, relative.1],
            information: mat2_to_array(&information),
        });
        if let Some(node) = self.nodes.get_mut(&node_id) {
            node.timestamp = timestamp;
        }
        let track = self.tracks.get_mut(&track_id).unwrap();
        track.samples.push(TrackSample {
            timestamp,
            x: mx,
            y: my,
        });
        let heading = track.heading();
        if let Some(node) = self.nodes.get_mut(&node_id) {
            if heading.is_some() {
                node.heading = heading;
            }
        }
        Ok(node_id)
    }

    /// Ingest a line observation: sampled points of a line feature in the
    /// observing pose's frame. Points are transformed to the map frame and
    /// appended to the feature's node (created on first sight); one
    /// line-observation edge ties them to the pose, and a single
    /// line-consistency factor per feature covers all accumulated points.
    pub fn observe_line(
        &mut self,
        pose_id: NodeId,
        points: &[(f64, f64)],
        covariance: &Matrix2<f64>,
        semantics: SemanticInfo,
    ) -> Result<NodeId, WorldError> {
        if points.len() < 4 {
            return Err(WorldError::TooFewLinePoints(points.len()));
        }
        check_pd2(covariance)?;
        let pose = self
            .nodes
            .get(&pose_id)
            .ok_or(WorldError::UnknownNode(pose_id))?
            .pose()
            .ok_or(WorldError::NotAPose(pose_id))?;
        let timestamp = self.nodes[&pose_id].timestamp;
        let information = covariance
            .cholesky()
            .ok_or(WorldError::NotPositiveDefinite(0.0))?
            .inverse();

        let track_id = semantics.track_id;
        let node_id = match self.tracks.get(&track_id) {
            Some(track) if self.nodes.contains_key(&track.node) => track.node,
            _ => {
                let id = self.alloc_node_id();
                self.nodes.insert(
                    id,
                    Node {
                        id,
                        kind: NodeKind::Line,
                        state: NodeState::LinePoints(Vec::new()),
                        heading: None,
                        semantics: Some(semantics.clone()),
                        timestamp,
                    },
                );
                self.tracks.insert(
                    track_id,
                    Track {
                        node: id,
                        class: semantics.class,
                        extent: semantics.extent,
                        samples: Vec::new(),
                    },
                );
                id
            }
        };

        let mut edge_points = Vec::with_capacity(points.len());
        {
            let node = self.nodes.get_mut(&node_id).unwrap();
            let NodeState::LinePoints(stored) = &mut node.state else {
                unreachable!("line track maps to a line node");
            };
            for &(bx, by) in points {
                let (mx, my) = pose.transform(bx, by);
                let pid = self.next_point_id;
                self.next_point_id += 1;
                stored.push(LinePoint {
                    id: pid,
                    x: mx,
                    y: my,
                    timestamp,
                    observed_from: pose_id,
                });
                edge_points.push((pid, [bx, by]));
            }
            sort_line_points(stored);
            node.timestamp = timestamp;
        }

        self.edges.push(Edge::LineObservation {
            pose: pose_id,
            line: node_id,
            points: edge_points,
            information: mat2_to_array(&information),
        });
        let has_consistency = self
            .edges
            .iter()
            .any(|e| matches!(e, Edge::LineConsistency { line, .. } if *line == node_id));
        if !has_consistency {
            // Default weight; the optimizer config may rescale it.
            self.edges.push(Edge::LineConsistency {
                line: node_id,
                weight: 1.0,
            });
        }
        Ok(node_id)
    }

    /// Retire nodes older than the window, trimming line features point-wise,
    /// and re-anchor the oldest surviving pose. Returns removed node count.
    pub fn prune_window(&mut self, now: f64) -> usize {
        let cutoff = now - self.config.window_duration;
        let newest_pose = self.latest_pose;

        let mut removed: Vec<NodeId> = Vec::new();
        for node in self.nodes.values_mut() {
            match node.kind {
                NodeKind::Av => {
                    if node.timestamp < cutoff && Some(node.id) != newest_pose {
                        removed.push(node.id);
                    }
                }
                NodeKind::Landmark => {
                    if node.timestamp < cutoff {
                        removed.push(node.id);
                    }
                }
                NodeKind::Line => {
                    let NodeState::LinePoints(points) = &mut node.state else {
                        continue;
                    };
                    points.retain(|p| p.timestamp >= cutoff);
                    if points.len() < 4 {
                        removed.push(node.id);
                    }
                }
            }
        }
        for id in &removed {
            self.nodes.remove(id);
        }

        let nodes = &self.nodes;
        self.edges.retain_mut(|edge| match edge {
            Edge::LineObservation { pose, line, points, .. } => {
                if !nodes.contains_key(pose) || !nodes.contains_key(line) {
                    return false;
                }
                let live = nodes[line].line_points().unwrap();
                points.retain(|(pid, _)| live.iter().any(|lp| lp.id == *pid));
                !points.is_empty()
            }
            _ => edge.node_ids().iter().all(|id| nodes.contains_key(id)),
        });

        // Drop tracks whose node disappeared, and stale trail samples.
        self.tracks.retain(|_, t| self.nodes.contains_key(&t.node));
        for track in self.tracks.values_mut() {
            track.samples.retain(|s| s.timestamp >= cutoff);
        }

        // Re-anchor: exactly one prior, on the oldest surviving pose.
        let oldest_pose = self
            .nodes
            .values()
            .filter(|n| n.kind == NodeKind::Av)
            .min_by(|a, b| a.timestamp.total_cmp(&b.timestamp))
            .map(|n| n.id);
        if let Some(oldest) = oldest_pose {
            let anchored = self
                .edges
                .iter()
                .any(|e| matches!(e, Edge::Prior { node, .. } if *node == oldest));
            if !anchored {
                self.edges
                    .retain(|e| !matches!(e, Edge::Prior { .. }));
                let at = self.nodes[&oldest].pose().unwrap();
                self.add_prior(oldest, at);
            }
        }

        removed.len()
    }

    /// Replace the edge set wholesale. Low-level hook for replay tooling and
    /// tests; callers are responsible for referential integrity (`audit`).
    pub fn set_edges_unchecked(&mut self, edges: Vec<Edge>) {
        self.edges = edges;
    }

    /// Referential-integrity audit: every edge resolves, line-observation
    /// point ids exist, and each line feature carries exactly one consistency
    /// factor. Returns the list of violations (empty when healthy).
    pub fn audit(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut consistency_count: BTreeMap<NodeId, usize> = BTreeMap::new();
        for (i, edge) in self.edges.iter().enumerate() {
            for id in edge.node_ids() {
                if !self.nodes.contains_key(&id) {
                    problems.push(format!("edge {i} references missing node {id:?}"));
                }
            }
            match edge {
                Edge::LineObservation { line, points, .. } => {
                    if let Some(node) = self.nodes.get(line) {
                        let live = node.line_points().unwrap_or(&[]);
                        for (pid, _) in points {
                            if !live.iter().any(|lp| lp.id == *pid) {
                                problems
                                    .push(format!("edge {i} references missing point {pid}"));
                            }
                        }
                    }
                }
                Edge::LineConsistency { line, .. } => {
                    *consistency_count.entry(*line).or_default() += 1;
                }
                _ => {}
            }
        }
        for (line, count) in consistency_count {
            if count != 1 {
                problems.push(format!("line {line:?} has {count} consistency factors"));
            }
        }
        for node in self.nodes.values() {
            if node.kind == NodeKind::Line {
                let n = node.line_points().map(|p| p.len()).unwrap_or(0);
                if n < 4 {
                    problems.push(format!("line {:?} holds only {n} points", node.id));
                }
            }
        }
        problems
    }

    /// Immutable view for field construction and planning.
    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            nodes: self.nodes.values().cloned().collect(),
            tracks: self.tracks.clone(),
            latest_pose: self.latest_pose.and_then(|id| self.nodes[&id].pose()),
            time: self
                .latest_pose
                .map(|id| self.nodes[&id].timestamp)
                .unwrap_or(0.0),
        }
    }
}

/// Order line points along the feature by projection onto the principal axis
/// of the point cloud. Observations arrive in overlapping chunks; the offset
/// construction needs a consistent traversal order.
pub fn sort_line_points(points: &mut [LinePoint]) {
    if points.len() < 2 {
        return;
    }
    let n = points.len() as f64;
    let (mut cx, mut cy) = (0.0, 0.0);
    for p in points.iter() {
        cx += p.x;
        cy += p.y;
    }
    cx /= n;
    cy /= n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points.iter() {
        let (dx, dy) = (p.x - cx, p.y - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Dominant eigenvector of the 2x2 covariance.
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let lam = 0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt();
    let (mut ax, mut ay) = if sxy.abs() > 1e-12 {
        (lam - syy, sxy)
    } else if sxx >= syy {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let norm = ax.hypot(ay);
    ax /= norm;
    ay /= norm;
    points.sort_by(|a, b| {
        let pa = (a.x - cx) * ax + (a.y - cy) * ay;
        let pb = (b.x - cx) * ax + (b.y - cy) * ay;
        pa.total_cmp(&pb).then(a.id.cmp(&b.id))
    });
}

/// Read-only copy of the graph contents used by the drivability and planning
/// layers; safe to share across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub nodes: Vec<Node>,
    pub tracks: BTreeMap<u64, Track>,
    pub latest_pose: Option<Pose2>,
    pub time: f64,
}

impl WorldSnapshot {
    pub fn empty() -> Self {
        Self {
            nodes: Vec::new(),
            tracks: BTreeMap::new(),
            latest_pose: None,
            time: 0.0,
        }
    }

    /// Track bookkeeping for a node, if it belongs to a track.
    pub fn track_for(&self, node: NodeId) -> Option<&Track> {
        self.tracks.values().find(|t| t.node == node)
    }
}

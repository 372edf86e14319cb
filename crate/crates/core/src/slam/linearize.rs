//! Residuals, Jacobians, and the damped normal-equation solve.

use super::OptimizerConfig;
use crate::implicit;
use crate::se2::{wrap_angle, Pose2};
use crate::world::{array_to_mat2, array_to_mat3, Edge, FactorGraph, NodeId, NodeKind, NodeState};
use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum FactorKind {
    Odometry,
    LandmarkObservation,
    LineObservation,
    LineConsistency,
    Prior,
}

impl FactorKind {
    fn of(edge: &Edge) -> Self {
        match edge {
            Edge::Odometry { .. } => FactorKind::Odometry,
            Edge::LandmarkObservation { .. } => FactorKind::LandmarkObservation,
            Edge::LineObservation { .. } => FactorKind::LineObservation,
            Edge::LineConsistency { .. } => FactorKind::LineConsistency,
            Edge::Prior { .. } => FactorKind::Prior,
        }
    }

    fn name(self) -> &'static str {
        match self {
            FactorKind::Odometry => "odometry",
            FactorKind::LandmarkObservation => "landmark-observation",
            FactorKind::LineObservation => "line-observation",
            FactorKind::LineConsistency => "line-consistency",
            FactorKind::Prior => "prior",
        }
    }
}

/// Line points of a feature in the traversal order the optimizer uses, as
/// `(point id, position)` pairs.
pub fn ordered_line_points(graph: &FactorGraph, line: NodeId) -> Vec<(u64, (f64, f64))> {
    graph
        .node(line)
        .and_then(|n| n.line_points())
        .map(|pts| pts.iter().map(|p| (p.id, (p.x, p.y))).collect())
        .unwrap_or_default()
}

/// Mutable copy of all optimized values, detached from the graph so the
/// optimizer can evaluate candidate steps before committing.
#[derive(Debug, Clone)]
pub(crate) struct State {
    pub poses: BTreeMap<NodeId, Pose2>,
    pub points: BTreeMap<NodeId, (f64, f64)>,
    pub lines: BTreeMap<NodeId, Vec<(u64, (f64, f64))>>,
}

impl State {
    pub fn from_graph(graph: &FactorGraph) -> Self {
        let mut poses = BTreeMap::new();
        let mut points = BTreeMap::new();
        let mut lines = BTreeMap::new();
        for node in graph.nodes() {
            match (&node.state, node.kind) {
                (NodeState::Pose { x, y, theta }, NodeKind::Av) => {
                    poses.insert(node.id, Pose2::new(*x, *y, *theta));
                }
                (NodeState::Point { x, y }, _) => {
                    points.insert(node.id, (*x, *y));
                }
                (NodeState::LinePoints(pts), _) => {
                    lines.insert(
                        node.id,
                        pts.iter().map(|p| (p.id, (p.x, p.y))).collect::<Vec<_>>(),
                    );
                }
                _ => {}
            }
        }
        Self {
            poses,
            points,
            lines,
        }
    }

    pub fn write_back(&self, graph: &mut FactorGraph) {
        let ids: Vec<NodeId> = graph.nodes().map(|n| n.id).collect();
        for id in ids {
            let node = graph.node_mut(id).unwrap();
            match &mut node.state {
                NodeState::Pose { x, y, theta } => {
                    let p = self.poses[&id];
                    *x = p.x;
                    *y = p.y;
                    *theta = p.theta;
                }
                NodeState::Point { x, y } => {
                    let p = self.points[&id];
                    *x = p.0;
                    *y = p.1;
                }
                NodeState::LinePoints(pts) => {
                    let by_id: BTreeMap<u64, (f64, f64)> =
                        self.lines[&id].iter().copied().collect();
                    for lp in pts.iter_mut() {
                        if let Some(&(x, y)) = by_id.get(&lp.id) {
                            lp.x = x;
                            lp.y = y;
                        }
                    }
                }
            }
        }
    }

    /// Apply a solved step through the variable table.
    pub fn stepped(&self, lin: &Linearizer, step: &Step) -> State {
        let mut out = self.clone();
        for (id, offset) in &lin.pose_offsets {
            let p = out.poses.get_mut(id).unwrap();
            p.x += step.pose[*offset];
            p.y += step.pose[*offset + 1];
            p.theta = wrap_angle(p.theta + step.pose[*offset + 2]);
        }
        for (id, offset) in &lin.point_offsets {
            let p = out.points.get_mut(id).unwrap();
            p.0 += step.elim[*offset];
            p.1 += step.elim[*offset + 1];
        }
        for (id, offsets) in &lin.line_offsets {
            let pts = out.lines.get_mut(id).unwrap();
            for (k, (_, pos)) in pts.iter_mut().enumerate() {
                pos.0 += step.elim[offsets + 2 * k];
                pos.1 += step.elim[offsets + 2 * k + 1];
            }
        }
        out
    }
}

pub(crate) struct Step {
    pub elim: DVector<f64>,
    pub pose: DVector<f64>,
}

/// Addressable scalar variable of the optimization problem.
#[derive(Debug, Clone, Copy)]
pub(crate) enum VarHandle {
    PoseX(NodeId),
    PoseY(NodeId),
    PoseTheta(NodeId),
    PointX(NodeId),
    PointY(NodeId),
    LinePoint(NodeId, u64, u8),
}

impl VarHandle {
    pub fn nudge(&self, graph: &mut FactorGraph, delta: f64) {
        match *self {
            VarHandle::PoseX(id) | VarHandle::PoseY(id) | VarHandle::PoseTheta(id) => {
                if let Some(NodeState::Pose { x, y, theta }) =
                    graph.node_mut(id).map(|n| &mut n.state)
                {
                    match self {
                        VarHandle::PoseX(_) => *x += delta,
                        VarHandle::PoseY(_) => *y += delta,
                        _ => *theta += delta,
                    }
                }
            }
            VarHandle::PointX(id) | VarHandle::PointY(id) => {
                if let Some(NodeState::Point { x, y }) = graph.node_mut(id).map(|n| &mut n.state) {
                    match self {
                        VarHandle::PointX(_) => *x += delta,
                        _ => *y += delta,
                    }
                }
            }
            VarHandle::LinePoint(id, pid, axis) => {
                if let Some(NodeState::LinePoints(pts)) =
                    graph.node_mut(id).map(|n| &mut n.state)
                {
                    if let Some(p) = pts.iter_mut().find(|p| p.id == pid) {
                        if axis == 0 {
                            p.x += delta;
                        } else {
                            p.y += delta;
                        }
                    }
                }
            }
        }
    }
}

struct BlockInfo {
    /// Offset of this block inside the eliminated segment.
    offset: usize,
    size: usize,
}

/// Variable table: landmark and line-point variables form per-node
/// elimination blocks; pose variables form the remaining dense block.
pub(crate) struct Linearizer {
    config: OptimizerConfig,
    pose_offsets: BTreeMap<NodeId, usize>,
    n_pose: usize,
    blocks: Vec<BlockInfo>,
    block_of_node: BTreeMap<NodeId, usize>,
    /// Landmark node -> offset in the eliminated segment.
    point_offsets: BTreeMap<NodeId, usize>,
    /// Line node -> base offset of its 2·N point variables.
    line_offsets: BTreeMap<NodeId, usize>,
    n_elim: usize,
}

impl Linearizer {
    pub fn new(graph: &FactorGraph, config: &OptimizerConfig) -> Self {
        let mut blocks = Vec::new();
        let mut block_of_node = BTreeMap::new();
        let mut point_offsets = BTreeMap::new();
        let mut line_offsets = BTreeMap::new();
        let mut n_elim = 0usize;
        let mut pose_offsets = BTreeMap::new();
        let mut n_pose = 0usize;
        for node in graph.nodes() {
            match node.kind {
                NodeKind::Av => {
                    pose_offsets.insert(node.id, n_pose);
                    n_pose += 3;
                }
                NodeKind::Landmark => {
                    block_of_node.insert(node.id, blocks.len());
                    point_offsets.insert(node.id, n_elim);
                    blocks.push(BlockInfo {
                        offset: n_elim,
                        size: 2,
                    });
                    n_elim += 2;
                }
                NodeKind::Line => {
                    let n = node.line_points().map(|p| p.len()).unwrap_or(0);
                    if n == 0 {
                        continue;
                    }
                    block_of_node.insert(node.id, blocks.len());
                    line_offsets.insert(node.id, n_elim);
                    blocks.push(BlockInfo {
                        offset: n_elim,
                        size: 2 * n,
                    });
                    n_elim += 2 * n;
                }
            }
        }
        Self {
            config: *config,
            pose_offsets,
            n_pose,
            blocks,
            block_of_node,
            point_offsets,
            line_offsets,
            n_elim,
        }
    }

    pub fn variable_count(&self) -> usize {
        self.n_pose + self.n_elim
    }

    /// One handle per scalar variable, in the system ordering (eliminated
    /// segment first, then poses). Test support for derivative checks.
    pub fn variable_layout(&self, graph: &FactorGraph) -> Vec<VarHandle> {
        let mut out = vec![None; self.variable_count()];
        for (id, off) in &self.point_offsets {
            out[*off] = Some(VarHandle::PointX(*id));
            out[*off + 1] = Some(VarHandle::PointY(*id));
        }
        for (id, base) in &self.line_offsets {
            let pts = graph.node(*id).and_then(|n| n.line_points()).unwrap_or(&[]);
            for (k, p) in pts.iter().enumerate() {
                out[base + 2 * k] = Some(VarHandle::LinePoint(*id, p.id, 0));
                out[base + 2 * k + 1] = Some(VarHandle::LinePoint(*id, p.id, 1));
            }
        }
        for (id, off) in &self.pose_offsets {
            out[self.n_elim + off] = Some(VarHandle::PoseX(*id));
            out[self.n_elim + off + 1] = Some(VarHandle::PoseY(*id));
            out[self.n_elim + off + 2] = Some(VarHandle::PoseTheta(*id));
        }
        out.into_iter().map(|v| v.expect("layout gap")).collect()
    }

    pub fn linearize(&self, state: &State, edges: &[Edge]) -> LinearSystem {
        let mut sys = LinearSystem::new(self);
        for edge in edges {
            self.accumulate(&mut sys, state, edge);
        }
        sys
    }

    fn accumulate(&self, sys: &mut LinearSystem, state: &State, edge: &Edge) {
        match edge {
            Edge::Odometry {
                from,
                to,
                delta,
                information,
            } => {
                let pi = state.poses[from];
                let pj = state.poses[to];
                let (s, c) = pi.theta.sin_cos();
                let (dtx, dty) = (pj.x - pi.x, pj.y - pi.y);
                let zhat0 = c * dtx + s * dty;
                let zhat1 = -s * dtx + c * dty;
                let r = Vector3::new(
                    delta[0] - zhat0,
                    delta[1] - zhat1,
                    wrap_angle(delta[2] - wrap_angle(pj.theta - pi.theta)),
                );
                #[rustfmt::skip]
                let ji = Matrix3::new(
                    c, s, -zhat1,
                    -s, c, zhat0,
                    0.0, 0.0, 1.0,
                );
                #[rustfmt::skip]
                let jj = Matrix3::new(
                    -c, -s, 0.0,
                    s, -c, 0.0,
                    0.0, 0.0, -1.0,
                );
                let omega = array_to_mat3(information);
                let oi = self.pose_offsets[from];
                let oj = self.pose_offsets[to];
                sys.add_pose_pose3(oi, oj, &ji, &jj, &omega, &r);
            }
            Edge::Prior {
                node,
                anchor,
                information,
            } => {
                let p = state.poses[node];
                let r = Vector3::new(
                    anchor[0] - p.x,
                    anchor[1] - p.y,
                    wrap_angle(anchor[2] - p.theta),
                );
                let j = -Matrix3::identity();
                let omega = array_to_mat3(information);
                let o = self.pose_offsets[node];
                sys.add_pose3(o, &j, &omega, &r);
            }
            Edge::LandmarkObservation {
                pose,
                landmark,
                relative,
                information,
            } => {
                let pi = state.poses[pose];
                let l = state.points[landmark];
                let (jp, jl, r) = point_observation(&pi, l, relative);
                let omega = array_to_mat2(information);
                let op = self.pose_offsets[pose];
                let block = self.block_of_node[landmark];
                let oe = self.point_offsets[landmark] - self.blocks[block].offset;
                sys.add_pose_elim(op, block, oe, &jp, &jl, &omega, &r);
            }
            Edge::LineObservation {
                pose,
                line,
                points,
                information,
            } => {
                let pi = state.poses[pose];
                let feature = &state.lines[line];
                let omega = array_to_mat2(information);
                let op = self.pose_offsets[pose];
                let block = self.block_of_node[line];
                let base = self.line_offsets[line];
                for (pid, meas) in points {
                    let Some(idx) = feature.iter().position(|(id, _)| id == pid) else {
                        continue;
                    };
                    let pos = feature[idx].1;
                    let (jp, jl, r) = point_observation(&pi, pos, meas);
                    let oe = base + 2 * idx - self.blocks[block].offset;
                    sys.add_pose_elim(op, block, oe, &jp, &jl, &omega, &r);
                }
            }
            Edge::LineConsistency { line, weight } => {
                let feature = &state.lines[line];
                let n = feature.len();
                if n < 4 {
                    return;
                }
                let fit = self.config.line_fit;
                let w = weight / self.config.line_consistency_sigma;
                let positions: Vec<(f64, f64)> = feature.iter().map(|(_, p)| *p).collect();
                let base =
                    implicit::line_factor_residual(&positions, fit.d_3l, fit.grad_norm_des);
                if base.capped {
                    // constant residual: contributes cost but no gradient
                    return;
                }
                let r0 = DVector::from_vec(base.values.clone());
                let m = r0.len();
                let h = self.config.jacobian_step;
                let mut jac = DMatrix::zeros(m, 2 * n);
                let mut work = positions.clone();
                for k in 0..n {
                    for axis in 0..2 {
                        let original = work[k];
                        if axis == 0 {
                            work[k].0 += h;
                        } else {
                            work[k].1 += h;
                        }
                        let perturbed =
                            implicit::line_factor_residual(&work, fit.d_3l, fit.grad_norm_des);
                        work[k] = original;
                        if perturbed.capped {
                            continue;
                        }
                        for row in 0..m {
                            jac[(row, 2 * k + axis)] = (perturbed.values[row] - r0[row]) / h;
                        }
                    }
                }
                let block = self.block_of_node[line];
                sys.add_elim_dense(block, &jac, w, &r0);
            }
        }
    }
}

/// Residual and Jacobians of a relative point observation: the measured
/// body-frame position minus the prediction R(θ)ᵀ(p − t).
fn point_observation(
    pose: &Pose2,
    target: (f64, f64),
    measured: &[f64; 2],
) -> (nalgebra::Matrix2x3<f64>, Matrix2<f64>, Vector2<f64>) {
    let (s, c) = pose.theta.sin_cos();
    let (dx, dy) = (target.0 - pose.x, target.1 - pose.y);
    let zhat = Vector2::new(c * dx + s * dy, -s * dx + c * dy);
    let r = Vector2::new(measured[0] - zhat.x, measured[1] - zhat.y);
    // d zhat / dθ = [-s c; -c -s]·(d), so dr/dθ negates it
    #[rustfmt::skip]
    let jp = nalgebra::Matrix2x3::new(
        c, s, s * dx - c * dy,
        -s, c, c * dx + s * dy,
    );
    #[rustfmt::skip]
    let jl = Matrix2::new(
        -c, -s,
        s, -c,
    );
    (jp, jl, r)
}

/// Normal equations split into the pose block, per-node elimination blocks,
/// and their coupling strips.
pub(crate) struct LinearSystem {
    h_pp: DMatrix<f64>,
    g_p: DVector<f64>,
    blocks: Vec<BlockSystem>,
    n_pose: usize,
    n_elim: usize,
    offsets: Vec<usize>,
}

struct BlockSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    g: DVector<f64>,
}

impl LinearSystem {
    fn new(lin: &Linearizer) -> Self {
        Self {
            h_pp: DMatrix::zeros(lin.n_pose, lin.n_pose),
            g_p: DVector::zeros(lin.n_pose),
            blocks: lin
                .blocks
                .iter()
                .map(|b| BlockSystem {
                    a: DMatrix::zeros(b.size, b.size),
                    b: DMatrix::zeros(b.size, lin.n_pose),
                    g: DVector::zeros(b.size),
                })
                .collect(),
            n_pose: lin.n_pose,
            n_elim: lin.n_elim,
            offsets: lin.blocks.iter().map(|b| b.offset).collect(),
        }
    }

    fn add_pose3(&mut self, o: usize, j: &Matrix3<f64>, omega: &Matrix3<f64>, r: &Vector3<f64>) {
        let jt_o = j.transpose() * omega;
        let h = jt_o * j;
        let g = jt_o * r;
        for i in 0..3 {
            for k in 0..3 {
                self.h_pp[(o + i, o + k)] += h[(i, k)];
            }
            self.g_p[o + i] += g[i];
        }
    }

    fn add_pose_pose3(
        &mut self,
        oi: usize,
        oj: usize,
        ji: &Matrix3<f64>,
        jj: &Matrix3<f64>,
        omega: &Matrix3<f64>,
        r: &Vector3<f64>,
    ) {
        let jio = ji.transpose() * omega;
        let jjo = jj.transpose() * omega;
        let hii = jio * ji;
        let hij = jio * jj;
        let hjj = jjo * jj;
        let gi = jio * r;
        let gj = jjo * r;
        for a in 0..3 {
            for b in 0..3 {
                self.h_pp[(oi + a, oi + b)] += hii[(a, b)];
                self.h_pp[(oi + a, oj + b)] += hij[(a, b)];
                self.h_pp[(oj + a, oi + b)] += hij[(b, a)];
                self.h_pp[(oj + a, oj + b)] += hjj[(a, b)];
            }
            self.g_p[oi + a] += gi[a];
            self.g_p[oj + a] += gj[a];
        }
    }

    fn add_pose_elim(
        &mut self,
        op: usize,
        block: usize,
        oe: usize,
        jp: &nalgebra::Matrix2x3<f64>,
        je: &Matrix2<f64>,
        omega: &Matrix2<f64>,
        r: &Vector2<f64>,
    ) {
        let jpo = jp.transpose() * omega;
        let jeo = je.transpose() * omega;
        let hpp = jpo * jp;
        let hpe = jpo * je;
        let hee = jeo * je;
        let gp = jpo * r;
        let ge = jeo * r;
        let blk = &mut self.blocks[block];
        for a in 0..3 {
            for b in 0..3 {
                self.h_pp[(op + a, op + b)] += hpp[(a, b)];
            }
            self.g_p[op + a] += gp[a];
        }
        for a in 0..2 {
            for b in 0..2 {
                blk.a[(oe + a, oe + b)] += hee[(a, b)];
            }
            for b in 0..3 {
                // coupling strip rows are elimination vars, columns poses
                blk.b[(oe + a, op + b)] += hpe[(b, a)];
            }
            blk.g[oe + a] += ge[a];
        }
    }

    fn add_elim_dense(&mut self, block: usize, jac: &DMatrix<f64>, w: f64, r: &DVector<f64>) {
        let blk = &mut self.blocks[block];
        let w2 = w * w;
        let jt = jac.transpose();
        blk.a += (&jt * jac) * w2;
        let g = (&jt * r) * w2;
        blk.g += g;
    }

    /// Full gradient in the system ordering (eliminated segment, poses).
    pub fn gradient(&self) -> DVector<f64> {
        let mut g = DVector::zeros(self.n_elim + self.n_pose);
        for (i, blk) in self.blocks.iter().enumerate() {
            let off = self.offsets[i];
            for k in 0..blk.g.len() {
                g[off + k] = blk.g[k];
            }
        }
        for k in 0..self.n_pose {
            g[self.n_elim + k] = self.g_p[k];
        }
        g
    }

    /// Solve (H + λ·diag(H)) δ = −g by eliminating the landmark/point blocks
    /// into the pose block, or densely for small systems.
    pub fn solve(&self, lambda: f64, config: &OptimizerConfig) -> Option<Step> {
        let nv = self.n_pose + self.n_elim;
        if config.force_dense || nv < config.dense_threshold {
            return self.solve_dense(lambda);
        }
        self.solve_schur(lambda)
    }

    fn damped(m: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
        let mut out = m.clone();
        for i in 0..out.nrows() {
            out[(i, i)] += lambda * out[(i, i)].abs().max(1e-12);
        }
        out
    }

    fn solve_schur(&self, lambda: f64) -> Option<Step> {
        let mut s = Self::damped(&self.h_pp, lambda);
        let mut rhs = -self.g_p.clone();
        let mut partials = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let a = Self::damped(&blk.a, lambda);
            let chol = a.cholesky()?;
            let ainv_b = chol.solve(&blk.b);
            let ainv_g = chol.solve(&blk.g);
            s -= blk.b.transpose() * &ainv_b;
            rhs += blk.b.transpose() * &ainv_g;
            partials.push((ainv_b, ainv_g, chol));
        }
        let pose = s.cholesky()?.solve(&rhs);
        let mut elim = DVector::zeros(self.n_elim);
        for (blk_idx, blk) in self.blocks.iter().enumerate() {
            let (ainv_b, ainv_g, _) = &partials[blk_idx];
            let delta = -(ainv_g + ainv_b * &pose);
            let off = self.offsets[blk_idx];
            for i in 0..blk.g.len() {
                elim[off + i] = delta[i];
            }
        }
        Some(Step { elim, pose })
    }

    fn solve_dense(&self, lambda: f64) -> Option<Step> {
        let nv = self.n_pose + self.n_elim;
        let mut h: DMatrix<f64> = DMatrix::zeros(nv, nv);
        let mut g: DVector<f64> = DVector::zeros(nv);
        // eliminated variables first, poses after
        for (blk_idx, blk) in self.blocks.iter().enumerate() {
            let off = self.offsets[blk_idx];
            let size = blk.g.len();
            for i in 0..size {
                for j in 0..size {
                    h[(off + i, off + j)] += blk.a[(i, j)];
                }
                for j in 0..self.n_pose {
                    h[(off + i, self.n_elim + j)] += blk.b[(i, j)];
                    h[(self.n_elim + j, off + i)] += blk.b[(i, j)];
                }
                g[off + i] += blk.g[i];
            }
        }
        for i in 0..self.n_pose {
            for j in 0..self.n_pose {
                h[(self.n_elim + i, self.n_elim + j)] += self.h_pp[(i, j)];
            }
            g[self.n_elim + i] += self.g_p[i];
        }
        for i in 0..nv {
            h[(i, i)] += lambda * h[(i, i)].abs().max(1e-12);
        }
        let sol = h.cholesky()?.solve(&(-g));
        Some(Step {
            elim: DVector::from_iterator(self.n_elim, sol.iter().take(self.n_elim).copied()),
            pose: DVector::from_iterator(self.n_pose, sol.iter().skip(self.n_elim).copied()),
        })
    }
}

pub(crate) fn residual(state: &State, edge: &Edge, config: &OptimizerConfig) -> DVector<f64> {
    match edge {
        Edge::Odometry {
            from, to, delta, ..
        } => {
            let pi = state.poses[from];
            let pj = state.poses[to];
            let between = pi.between(&pj);
            DVector::from_vec(vec![
                delta[0] - between.x,
                delta[1] - between.y,
                wrap_angle(delta[2] - between.theta),
            ])
        }
        Edge::Prior { node, anchor, .. } => {
            let p = state.poses[node];
            DVector::from_vec(vec![
                anchor[0] - p.x,
                anchor[1] - p.y,
                wrap_angle(anchor[2] - p.theta),
            ])
        }
        Edge::LandmarkObservation {
            pose,
            landmark,
            relative,
            ..
        } => {
            let pi = state.poses[pose];
            let (bx, by) = pi.transform_inv(state.points[landmark].0, state.points[landmark].1);
            DVector::from_vec(vec![relative[0] - bx, relative[1] - by])
        }
        Edge::LineObservation {
            pose, line, points, ..
        } => {
            let pi = state.poses[pose];
            let feature = &state.lines[line];
            let mut r = Vec::with_capacity(2 * points.len());
            for (pid, meas) in points {
                if let Some((_, pos)) = feature.iter().find(|(id, _)| id == pid) {
                    let (bx, by) = pi.transform_inv(pos.0, pos.1);
                    r.push(meas[0] - bx);
                    r.push(meas[1] - by);
                }
            }
            DVector::from_vec(r)
        }
        Edge::LineConsistency { line, .. } => {
            let feature = &state.lines[line];
            let positions: Vec<(f64, f64)> = feature.iter().map(|(_, p)| *p).collect();
            let fit = config.line_fit;
            if positions.len() < 4 {
                return DVector::zeros(0);
            }
            DVector::from_vec(
                implicit::line_factor_residual(&positions, fit.d_3l, fit.grad_norm_des).values,
            )
        }
    }
}

fn edge_cost(state: &State, edge: &Edge, config: &OptimizerConfig) -> f64 {
    let r = residual(state, edge, config);
    match edge {
        Edge::Odometry { information, .. } | Edge::Prior { information, .. } => {
            let omega = array_to_mat3(information);
            let v = Vector3::new(r[0], r[1], r[2]);
            (v.transpose() * omega * v)[(0, 0)]
        }
        Edge::LandmarkObservation { information, .. } => {
            let omega = array_to_mat2(information);
            let v = Vector2::new(r[0], r[1]);
            (v.transpose() * omega * v)[(0, 0)]
        }
        Edge::LineObservation { information, .. } => {
            let omega = array_to_mat2(information);
            let mut cost = 0.0;
            for k in 0..r.len() / 2 {
                let v = Vector2::new(r[2 * k], r[2 * k + 1]);
                cost += (v.transpose() * omega * v)[(0, 0)];
            }
            cost
        }
        Edge::LineConsistency { weight, .. } => {
            let w = weight / config.line_consistency_sigma;
            w * w * r.norm_squared()
        }
    }
}

pub(crate) fn total_cost(state: &State, edges: &[Edge], config: &OptimizerConfig) -> f64 {
    edges.iter().map(|e| edge_cost(state, e, config)).sum()
}

pub(crate) fn cost_breakdown(
    state: &State,
    edges: &[Edge],
    config: &OptimizerConfig,
) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for edge in edges {
        *out.entry(FactorKind::of(edge).name().to_string())
            .or_insert(0.0) += edge_cost(state, edge, config);
    }
    out
}

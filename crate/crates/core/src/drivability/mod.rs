//! Artificial-potential-field drivability extracted from the optimized
//! graph.
//!
//! Every node contributes a scalar field built from sigmoids of implicit
//! functions: bounding boxes are products of four edge sigmoids, line
//! features are a ridge along the fitted implicit cubic confined by two
//! boundary surfaces and a validity region, and domain-knowledge rules
//! rescale each contribution by a per-class constant (negative values
//! attract). The total drivability is the superposition over all nodes.

pub mod grid;

use crate::implicit::{self, BoundaryPair, ImplicitCubic};
use crate::slam::LineFitParams;
use crate::world::{Node, NodeKind, SemanticClass, WorldSnapshot};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidParams {
    /// Amplitude: the field's upper asymptote.
    pub alpha: f64,
    /// Growth rate per unit of the implicit-function value.
    pub beta: f64,
}

impl SigmoidParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        assert!(alpha > 0.0, "base amplitude must be positive");
        assert!(beta > 0.0, "growth rate must be positive");
        Self { alpha, beta }
    }
}

/// Logistic curve with asymptotes 0 and alpha: S(x) = α / (1 + e^(−βx)).
pub fn sigmoid(x: f64, p: &SigmoidParams) -> f64 {
    p.alpha / (1.0 + (-p.beta * x).exp())
}

/// Correction factor recovering the amplitude after multiplying `a`
/// sigmoids: φ = 2^a · α^(1−a).
pub fn amplitude_correction(a: u32, alpha: f64) -> f64 {
    2f64.powi(a as i32) * alpha.powi(1 - a as i32)
}

/// Oriented bounding box, defined by its center, heading, and size. The two
/// stored corners are the diagonal pair that makes all four edge functions
/// positive in the interior (for θ = 0: rear-left and front-right).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BboxSpec {
    pub center: (f64, f64),
    pub theta: f64,
    pub length: f64,
    pub width: f64,
}

impl BboxSpec {
    pub fn new(center: (f64, f64), theta: f64, length: f64, width: f64) -> Self {
        assert!(length > 0.0 && width > 0.0, "extent must be positive");
        let spec = Self {
            center,
            theta,
            length,
            width,
        };
        debug_assert!((0..4).all(|i| bbox_edge(center.0, center.1, i, &spec) > 0.0));
        spec
    }

    /// Corner anchoring edges 0 and 1 (rear-left in the body frame).
    pub fn corner1(&self) -> (f64, f64) {
        self.corner(-0.5 * self.length, 0.5 * self.width)
    }

    /// Corner anchoring edges 2 and 3 (front-right in the body frame).
    pub fn corner2(&self) -> (f64, f64) {
        self.corner(0.5 * self.length, -0.5 * self.width)
    }

    fn corner(&self, lx: f64, ly: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (
            self.center.0 + c * lx - s * ly,
            self.center.1 + s * lx + c * ly,
        )
    }

    /// Planar distance from a point to the box (0 inside).
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let bx = (c * dx + s * dy).abs() - 0.5 * self.length;
        let by = (-s * dx + c * dy).abs() - 0.5 * self.width;
        let (ox, oy) = (bx.max(0.0), by.max(0.0));
        ox.hypot(oy)
    }
}

/// Signed offset from edge `i` of the box, positive on the interior side:
/// g(x, y, i) = (x − xc)·cos(θ − iπ/2) + (y − yc)·sin(θ − iπ/2), anchored at
/// corner1 for i ∈ {0, 1} and corner2 for i ∈ {2, 3}.
pub fn bbox_edge(x: f64, y: f64, i: usize, spec: &BboxSpec) -> f64 {
    assert!(i < 4, "edge index out of range");
    let (xc, yc) = if i < 2 {
        spec.corner1()
    } else {
        spec.corner2()
    };
    let angle = spec.theta - i as f64 * std::f64::consts::FRAC_PI_2;
    (x - xc) * angle.cos() + (y - yc) * angle.sin()
}

/// Product of the four edge sigmoids.
pub fn bbox_drivability(x: f64, y: f64, spec: &BboxSpec, p: &SigmoidParams) -> f64 {
    (0..4)
        .map(|i| sigmoid(bbox_edge(x, y, i, spec), p))
        .product()
}

/// Ridge along a fitted line: the product of the sigmoid of the implicit
/// function, its negation, and the two boundary sigmoids, amplitude-corrected
/// for the four factors.
pub fn line_drivability(
    x: f64,
    y: f64,
    f: &ImplicitCubic,
    bounds: &BoundaryPair,
    p: &SigmoidParams,
) -> f64 {
    let v = f.evaluate(x, y);
    amplitude_correction(4, p.alpha)
        * sigmoid(v, p)
        * sigmoid(-v, p)
        * sigmoid(bounds.left.evaluate(x, y), p)
        * sigmoid(bounds.right.evaluate(x, y), p)
}

/// The two cap half-planes confining a line's field to its observed extent.
/// Each cap is anchored at one of the two most separated samples, oriented
/// along the local line direction, positive toward the other cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityRegion {
    pub caps: [CapEdge; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapEdge {
    pub anchor: (f64, f64),
    /// Unit inward direction.
    pub direction: (f64, f64),
}

impl CapEdge {
    pub fn offset(&self, x: f64, y: f64) -> f64 {
        (x - self.anchor.0) * self.direction.0 + (y - self.anchor.1) * self.direction.1
    }
}

impl ValidityRegion {
    /// Product of the two cap sigmoids: near α between the caps, near zero
    /// beyond them.
    pub fn drivability(&self, x: f64, y: f64, p: &SigmoidParams) -> f64 {
        self.caps
            .iter()
            .map(|cap| sigmoid(cap.offset(x, y), p))
            .product()
    }
}

/// Select the pair of samples with maximal separation and build the cap
/// edges from the local line direction at each of them.
pub fn validity_region(points: &[(f64, f64)]) -> ValidityRegion {
    assert!(points.len() >= 2, "validity region needs at least 2 points");
    let (mut best, mut pair) = (f64::NEG_INFINITY, (0, 0));
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d2 = (points[i].0 - points[j].0).powi(2) + (points[i].1 - points[j].1).powi(2);
            if d2 > best {
                best = d2;
                pair = (i, j);
            }
        }
    }
    let cap_at = |k: usize, other: (f64, f64)| {
        let n = points.len();
        let (a, b) = if k == 0 {
            (points[0], points[1])
        } else if k == n - 1 {
            (points[n - 2], points[n - 1])
        } else {
            (points[k - 1], points[k + 1])
        };
        let (mut dx, mut dy) = (b.0 - a.0, b.1 - a.1);
        let norm = dx.hypot(dy).max(1e-12);
        dx /= norm;
        dy /= norm;
        // orient inward: positive toward the opposite cap
        if (other.0 - points[k].0) * dx + (other.1 - points[k].1) * dy < 0.0 {
            dx = -dx;
            dy = -dy;
        }
        CapEdge {
            anchor: points[k],
            direction: (dx, dy),
        }
    };
    ValidityRegion {
        caps: [
            cap_at(pair.0, points[pair.1]),
            cap_at(pair.1, points[pair.0]),
        ],
    }
}

/// Unit-amplitude anisotropic Gaussian in the node's rotated frame; the
/// baseline object representation the bounding-box field replaces.
pub fn bi_gaussian_drivability(node: &Node, spread: (f64, f64), x: f64, y: f64) -> f64 {
    let Some((cx, cy)) = node.point() else {
        return 0.0;
    };
    let theta = node.heading.unwrap_or(0.0);
    let (s, c) = theta.sin_cos();
    let (dx, dy) = (x - cx, y - cy);
    let u = c * dx + s * dy;
    let v = -s * dx + c * dy;
    (-0.5 * ((u / spread.0).powi(2) + (v / spread.1).powi(2))).exp()
}

/// Per-class field modifier and growth rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRule {
    /// Domain-knowledge multiplier δ applied to the unit-amplitude field;
    /// negative values attract.
    pub delta: f64,
    pub beta: f64,
}

/// Trail stamped behind vehicles observed in motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrailRule {
    pub delta: f64,
    /// Minimum spacing between stamps, seconds.
    pub stamp_period: f64,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivabilityRules {
    pub classes: BTreeMap<SemanticClass, ClassRule>,
    /// Applied to nodes whose class has no entry.
    pub fallback: ClassRule,
    /// Below this speed a tracked vehicle is treated as a static obstacle.
    pub stopped_speed: f64,
    pub trail: TrailRule,
}

impl Default for DrivabilityRules {
    fn default() -> Self {
        let mut classes = BTreeMap::new();
        classes.insert(
            SemanticClass::StaticObstacle,
            ClassRule {
                delta: 1e5,
                beta: 10.0,
            },
        );
        classes.insert(
            SemanticClass::MovingVehicle,
            ClassRule {
                delta: 1e5,
                beta: 10.0,
            },
        );
        classes.insert(
            SemanticClass::ConeLandmark,
            ClassRule {
                delta: 1e3,
                beta: 10.0,
            },
        );
        classes.insert(
            SemanticClass::SolidLaneLine,
            ClassRule {
                delta: 1e3,
                beta: 5.0,
            },
        );
        classes.insert(
            SemanticClass::DashedLaneLine,
            ClassRule {
                delta: 0.0,
                beta: 5.0,
            },
        );
        classes.insert(
            SemanticClass::ObservedDriveRegion,
            ClassRule {
                delta: -50.0,
                beta: 10.0,
            },
        );
        let rules = Self {
            classes,
            fallback: ClassRule {
                delta: 0.0,
                beta: 10.0,
            },
            stopped_speed: 0.5,
            trail: TrailRule {
                delta: -50.0,
                stamp_period: 0.5,
                enabled: true,
            },
        };
        rules.validate();
        rules
    }
}

impl DrivabilityRules {
    pub fn rule_for(&self, class: SemanticClass) -> ClassRule {
        self.classes.get(&class).copied().unwrap_or(self.fallback)
    }

    /// Obstacle dominance and attraction-sign checks.
    pub fn validate(&self) {
        let obstacle = self.rule_for(SemanticClass::StaticObstacle).delta;
        for (class, rule) in &self.classes {
            if *class != SemanticClass::StaticObstacle {
                assert!(
                    obstacle >= rule.delta,
                    "static obstacles must dominate {class:?}"
                );
            }
        }
        assert!(
            self.rule_for(SemanticClass::ObservedDriveRegion).delta < 0.0,
            "observed drive regions must attract"
        );
    }
}

/// One compiled field contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeField {
    Bbox {
        spec: BboxSpec,
        delta: f64,
        beta: f64,
    },
    Line {
        curve: ImplicitCubic,
        bounds: BoundaryPair,
        caps: ValidityRegion,
        delta: f64,
        beta: f64,
    },
    BiGaussian {
        center: (f64, f64),
        theta: f64,
        spread: (f64, f64),
        delta: f64,
    },
}

impl NodeField {
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        match self {
            NodeField::Bbox { spec, delta, beta } => {
                let p = SigmoidParams::new(1.0, *beta);
                delta * bbox_drivability(x, y, spec, &p)
            }
            NodeField::Line {
                curve,
                bounds,
                caps,
                delta,
                beta,
            } => {
                let p = SigmoidParams::new(1.0, *beta);
                delta * line_drivability(x, y, curve, bounds, &p) * caps.drivability(x, y, &p)
            }
            NodeField::BiGaussian {
                center,
                theta,
                spread,
                delta,
            } => {
                let (s, c) = theta.sin_cos();
                let (dx, dy) = (x - center.0, y - center.1);
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                delta * (-0.5 * ((u / spread.0).powi(2) + (v / spread.1).powi(2))).exp()
            }
        }
    }
}

/// Compile a node into its unit-amplitude field times the class modifier.
/// Returns None for AV poses, zero-modifier classes, and nodes without the
/// geometry their field needs. Motion handling of tracked vehicles happens
/// at snapshot level; here a vehicle compiles as if stationary.
pub fn compile_node(node: &Node, rules: &DrivabilityRules, fit: &LineFitParams) -> Option<NodeField> {
    if node.kind == NodeKind::Av {
        return None;
    }
    let semantics = node.semantics.as_ref()?;
    let rule = rules.rule_for(semantics.class);
    if rule.delta == 0.0 {
        return None;
    }
    match node.kind {
        NodeKind::Landmark => {
            let (length, width) = semantics.extent?;
            let center = node.point()?;
            Some(NodeField::Bbox {
                spec: BboxSpec::new(center, node.heading.unwrap_or(0.0), length, width),
                delta: rule.delta,
                beta: rule.beta,
            })
        }
        NodeKind::Line => {
            let pts: Vec<(f64, f64)> = node.line_points()?.iter().map(|p| (p.x, p.y)).collect();
            if pts.len() < 4 {
                return None;
            }
            let lines = implicit::build_offset_lines(&pts, fit.d_3l, fit.grad_norm_des).ok()?;
            let cubic = implicit::fit_implicit_cubic(&lines);
            if cubic.degenerate {
                return None;
            }
            let bounds = implicit::fit_boundary_pair(&lines).ok()?;
            Some(NodeField::Line {
                curve: cubic.curve,
                bounds,
                caps: validity_region(&pts),
                delta: rule.delta,
                beta: rule.beta,
            })
        }
        NodeKind::Av => None,
    }
}

/// Drivability of a single node at a point (unit amplitude times its class
/// modifier). Convenience wrapper over [`compile_node`].
pub fn node_drivability(
    node: &Node,
    rules: &DrivabilityRules,
    fit: &LineFitParams,
    x: f64,
    y: f64,
) -> f64 {
    compile_node(node, rules, fit)
        .map(|f| f.evaluate(x, y))
        .unwrap_or(0.0)
}

/// The compiled field: superposition of per-node contributions over an
/// immutable snapshot. Evaluation is pure and thread-safe.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DrivabilityField {
    pub emitters: Vec<NodeField>,
}

impl DrivabilityField {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Build the field from a world snapshot. Tracked vehicles observed in
    /// motion contribute an attractive trail stamped at their past observed
    /// poses instead of a repulsive box; once their speed estimate drops
    /// below the stopped threshold they become static obstacles again.
    pub fn from_snapshot(
        snapshot: &WorldSnapshot,
        rules: &DrivabilityRules,
        fit: &LineFitParams,
    ) -> Self {
        let mut emitters = Vec::new();
        for node in &snapshot.nodes {
            let is_vehicle = node
                .semantics
                .as_ref()
                .map(|s| s.class == SemanticClass::MovingVehicle)
                .unwrap_or(false);
            if !is_vehicle {
                if let Some(f) = compile_node(node, rules, fit) {
                    emitters.push(f);
                }
                continue;
            }
            let track = snapshot.track_for(node.id);
            let moving = track
                .and_then(|t| t.speed())
                .map(|v| v >= rules.stopped_speed)
                .unwrap_or(false);
            if !moving {
                if let Some(f) = compile_node(node, rules, fit) {
                    emitters.push(f);
                }
                continue;
            }
            // in motion: no obstacle box, but its wake confirms drivability
            if !rules.trail.enabled {
                continue;
            }
            let Some(track) = track else { continue };
            let Some((length, width)) = track.extent else {
                continue;
            };
            let beta = rules.rule_for(SemanticClass::ObservedDriveRegion).beta;
            let mut last_stamp = f64::NEG_INFINITY;
            for (i, sample) in track.samples.iter().enumerate() {
                if sample.timestamp - last_stamp < rules.trail.stamp_period {
                    continue;
                }
                last_stamp = sample.timestamp;
                let heading = track
                    .samples
                    .get(i + 1)
                    .or_else(|| i.checked_sub(1).and_then(|j| track.samples.get(j)))
                    .map(|other| {
                        let (dx, dy) = if other.timestamp > sample.timestamp {
                            (other.x - sample.x, other.y - sample.y)
                        } else {
                            (sample.x - other.x, sample.y - other.y)
                        };
                        dy.atan2(dx)
                    })
                    .unwrap_or(0.0);
                emitters.push(NodeField::Bbox {
                    spec: BboxSpec::new((sample.x, sample.y), heading, length, width),
                    delta: rules.trail.delta,
                    beta,
                });
            }
        }
        Self { emitters }
    }

    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        self.emitters.iter().map(|e| e.evaluate(x, y)).sum()
    }
}

/// Total drivability at a point: the sum over all node contributions.
pub fn total_drivability(
    snapshot: &WorldSnapshot,
    rules: &DrivabilityRules,
    fit: &LineFitParams,
    x: f64,
    y: f64,
) -> f64 {
    DrivabilityField::from_snapshot(snapshot, rules, fit).evaluate(x, y)
}

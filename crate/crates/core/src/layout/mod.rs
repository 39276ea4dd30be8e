//! Non-overlapping bounding-box layout.
//!
//! Places one box per attention peak inside the unit square, minimizing the
//! summed L1 distance from box centers to their peaks subject to boundary,
//! minimum-area, aspect-ratio, and pairwise non-overlap constraints.
//!
//! The bilinear area constraint `w * h >= a_min` is replaced by chord cuts
//! of the hyperbola `w = a_min / h`: chords of a convex function lie above
//! it, so the linearized region is a conservative inner approximation and
//! every solution satisfies the true area bound. Non-overlap is the usual
//! four-way disjunction (left/right/above/below); the solver branches over
//! those directions with an LP relaxation bound at each node, which yields
//! the exact optimum of the linearized program.

mod simplex;

pub use simplex::{Constraint, LpOutcome, Rel};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::gate::AttentionMap;

/// Which constraint family made the program infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleFamily {
    /// Total requested area cannot fit (`n * a_min > 1`).
    Area,
    /// A single box cannot satisfy boundary, area, and aspect jointly.
    Geometry,
    /// Boxes fit individually but cannot be made disjoint.
    NonOverlap,
}

impl std::fmt::Display for InfeasibleFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InfeasibleFamily::Area => write!(f, "area"),
            InfeasibleFamily::Geometry => write!(f, "geometry (boundary/area/aspect)"),
            InfeasibleFamily::NonOverlap => write!(f, "non-overlap"),
        }
    }
}

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("infeasible: {family}")]
    Infeasible { family: InfeasibleFamily },
    #[error("internal solver error: {0}")]
    Internal(String),
}

/// Target peaks plus the geometric knobs of the program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutProblem {
    /// Attention peaks in the unit square, one per box.
    pub targets: Vec<(f64, f64)>,
    /// Minimum box area.
    pub a_min: f64,
    /// Aspect-ratio lower bound (width / height).
    pub r_min: f64,
    /// Aspect-ratio upper bound.
    pub r_max: f64,
    /// Big-M constant of the disjunctive formulation. Any value >= 1 is
    /// vacuous on the unit square; the solver enforces the disjunction
    /// exactly.
    #[serde(default = "default_big_m")]
    pub big_m: f64,
    /// Number of chord cuts linearizing the area constraint.
    #[serde(default = "default_area_cuts")]
    pub area_cuts: usize,
}

fn default_big_m() -> f64 {
    1.0
}

fn default_area_cuts() -> usize {
    16
}

impl LayoutProblem {
    pub fn new(targets: Vec<(f64, f64)>, a_min: f64, r_min: f64, r_max: f64) -> Self {
        Self {
            targets,
            a_min,
            r_min,
            r_max,
            big_m: default_big_m(),
            area_cuts: default_area_cuts(),
        }
    }

    /// Default geometry for `n` boxes: joint area capped at a quarter of the
    /// canvas (`a_min = 0.5 / (2n)`), aspect ratios in `[1, 6]`.
    pub fn with_default_geometry(targets: Vec<(f64, f64)>) -> Self {
        let n = targets.len().max(1);
        Self::new(targets, 0.5 / (2.0 * n as f64), 1.0, 6.0)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let n = self.targets.len();
        if !(1..=8).contains(&n) {
            return Err(LayoutError::InvalidProblem(format!(
                "target count must be in [1, 8], got {n}"
            )));
        }
        for (i, (x, y)) in self.targets.iter().enumerate() {
            if !(0.0..=1.0).contains(x) || !(0.0..=1.0).contains(y) || !x.is_finite() || !y.is_finite() {
                return Err(LayoutError::InvalidProblem(format!(
                    "target {i} = ({x}, {y}) is outside the unit square"
                )));
            }
        }
        if !(self.a_min > 0.0) || !self.a_min.is_finite() {
            return Err(LayoutError::InvalidProblem(format!(
                "a_min must be > 0, got {}",
                self.a_min
            )));
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max) || !self.r_max.is_finite() {
            return Err(LayoutError::InvalidProblem(format!(
                "aspect bounds must satisfy 0 < r_min <= r_max, got [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        if !(self.big_m >= 1.0) {
            return Err(LayoutError::InvalidProblem(format!(
                "big_m must be >= 1 on the unit square, got {}",
                self.big_m
            )));
        }
        if self.area_cuts < 2 {
            return Err(LayoutError::InvalidProblem(format!(
                "area_cuts must be >= 2, got {}",
                self.area_cuts
            )));
        }
        if n as f64 * self.a_min > 1.0 {
            return Err(LayoutError::Infeasible {
                family: InfeasibleFamily::Area,
            });
        }
        Ok(())
    }
}

/// Axis-aligned rectangle in normalized coordinates: bottom-left corner
/// `(m_offset, n_offset)` and extent `(m_scale, n_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub m_offset: f64,
    pub n_offset: f64,
    pub m_scale: f64,
    pub n_scale: f64,
}

impl BoundingBox {
    pub fn center(&self) -> (f64, f64) {
        (
            self.m_offset + 0.5 * self.m_scale,
            self.n_offset + 0.5 * self.n_scale,
        )
    }

    pub fn area(&self) -> f64 {
        self.m_scale * self.n_scale
    }

    /// True when the pixel-center point lies inside, with the left/bottom
    /// edges inclusive and the right/top exclusive.
    pub fn contains_half_open(&self, x: f64, y: f64) -> bool {
        x >= self.m_offset
            && x < self.m_offset + self.m_scale
            && y >= self.n_offset
            && y < self.n_offset + self.n_scale
    }
}

// The wire form is the bare 4-tuple `[m_offset, n_offset, m_scale, n_scale]`.
impl Serialize for BoundingBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.m_offset, self.n_offset, self.m_scale, self.n_scale].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = <[f64; 4]>::deserialize(deserializer)?;
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(D::Error::custom("bounding box components must be finite"));
        }
        Ok(BoundingBox {
            m_offset: raw[0],
            n_offset: raw[1],
            m_scale: raw[2],
            n_scale: raw[3],
        })
    }
}

/// Separation direction: how box `i` relates to box `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
    Above,
    Below,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Left,
        Direction::Right,
        Direction::Above,
        Direction::Below,
    ];
}

/// The chosen separation for one box pair, serialized as `[i, j, "left"]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSeparation(pub usize, pub usize, pub Direction);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSolution {
    pub boxes: Vec<BoundingBox>,
    /// Sum of L1 distances from box centers to their targets.
    pub objective: f64,
    pub separation: Vec<PairSeparation>,
}

// --- LP assembly -------------------------------------------------------------
//
// Six variables per box: offsets, scales, and the two absolute-value
// surrogates for the center displacement.

const VARS_PER_BOX: usize = 6;
const X0: usize = 0;
const Y0: usize = 1;
const W: usize = 2;
const H: usize = 3;
const U: usize = 4; // |dx|
const V: usize = 5; // |dy|

fn var(i: usize, which: usize) -> usize {
    i * VARS_PER_BOX + which
}

/// Chords of `w = a_min / h` sampled geometrically over `[h_lo, 1]`.
/// Geometric spacing equalizes the relative over-approximation, keeping the
/// feasibility loss under 1% of box width at the default 16 cuts.
fn area_chords(a_min: f64, h_lo: f64, cuts: usize) -> Vec<(f64, f64)> {
    debug_assert!(h_lo > 0.0 && h_lo <= 1.0);
    if 1.0 - h_lo < 1e-12 {
        // Height pinned at 1; the area bound degenerates to w >= a_min.
        return vec![(0.0, a_min)];
    }
    let ratio = (1.0 / h_lo).powf(1.0 / cuts as f64);
    let point = |k: usize| h_lo * ratio.powi(k as i32);
    (0..cuts)
        .map(|k| {
            let (ha, hb) = (point(k), point(k + 1).min(1.0));
            let slope = -a_min / (ha * hb);
            let intercept = a_min / ha + a_min / hb;
            (slope, intercept)
        })
        .collect()
}

fn base_constraints(problem: &LayoutProblem) -> Vec<Constraint> {
    let n = problem.targets.len();
    let nv = n * VARS_PER_BOX;
    let h_lo = (problem.a_min / problem.r_max).sqrt();
    let chords = area_chords(problem.a_min, h_lo.min(1.0), problem.area_cuts);

    let mut rows = Vec::new();
    let mut row = |pairs: &[(usize, f64)], rel: Rel, rhs: f64| {
        let mut coeffs = vec![0.0; nv];
        for (j, a) in pairs {
            coeffs[*j] = *a;
        }
        rows.push(Constraint { coeffs, rel, rhs });
    };

    for i in 0..n {
        let (px, py) = problem.targets[i];
        // Boundary.
        row(&[(var(i, X0), 1.0), (var(i, W), 1.0)], Rel::Le, 1.0);
        row(&[(var(i, Y0), 1.0), (var(i, H), 1.0)], Rel::Le, 1.0);
        // Aspect ratio.
        row(&[(var(i, W), 1.0), (var(i, H), -problem.r_min)], Rel::Ge, 0.0);
        row(&[(var(i, W), -1.0), (var(i, H), problem.r_max)], Rel::Ge, 0.0);
        // Chord cuts only certify the area on [h_lo, 1], so pin h there.
        row(&[(var(i, H), 1.0)], Rel::Ge, h_lo.min(1.0));
        for (slope, intercept) in &chords {
            row(&[(var(i, W), 1.0), (var(i, H), -slope)], Rel::Ge, *intercept);
        }
        // |dx| >= +-(x0 + w/2 - px), same for |dy|.
        row(
            &[(var(i, U), 1.0), (var(i, X0), -1.0), (var(i, W), -0.5)],
            Rel::Ge,
            -px,
        );
        row(
            &[(var(i, U), 1.0), (var(i, X0), 1.0), (var(i, W), 0.5)],
            Rel::Ge,
            px,
        );
        row(
            &[(var(i, V), 1.0), (var(i, Y0), -1.0), (var(i, H), -0.5)],
            Rel::Ge,
            -py,
        );
        row(
            &[(var(i, V), 1.0), (var(i, Y0), 1.0), (var(i, H), 0.5)],
            Rel::Ge,
            py,
        );
    }
    rows
}

fn separation_constraint(n_vars: usize, i: usize, j: usize, d: Direction) -> Constraint {
    let mut coeffs = vec![0.0; n_vars];
    match d {
        Direction::Left => {
            coeffs[var(i, X0)] = 1.0;
            coeffs[var(i, W)] = 1.0;
            coeffs[var(j, X0)] = -1.0;
        }
        Direction::Right => {
            coeffs[var(j, X0)] = 1.0;
            coeffs[var(j, W)] = 1.0;
            coeffs[var(i, X0)] = -1.0;
        }
        Direction::Above => {
            coeffs[var(i, Y0)] = 1.0;
            coeffs[var(i, H)] = 1.0;
            coeffs[var(j, Y0)] = -1.0;
        }
        Direction::Below => {
            coeffs[var(j, Y0)] = 1.0;
            coeffs[var(j, H)] = 1.0;
            coeffs[var(i, Y0)] = -1.0;
        }
    }
    Constraint {
        coeffs,
        rel: Rel::Le,
        rhs: 0.0,
    }
}

fn objective_vector(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * VARS_PER_BOX];
    for i in 0..n {
        c[var(i, U)] = 1.0;
        c[var(i, V)] = 1.0;
    }
    c
}

fn boxes_from_lp(n: usize, x: &[f64]) -> Vec<BoundingBox> {
    (0..n)
        .map(|i| BoundingBox {
            m_offset: x[var(i, X0)],
            n_offset: x[var(i, Y0)],
            m_scale: x[var(i, W)],
            n_scale: x[var(i, H)],
        })
        .collect()
}

fn l1_objective(boxes: &[BoundingBox], targets: &[(f64, f64)]) -> f64 {
    boxes
        .iter()
        .zip(targets)
        .map(|(b, (px, py))| {
            let (cx, cy) = b.center();
            (cx - px).abs() + (cy - py).abs()
        })
        .sum()
}

const OVERLAP_TOL: f64 = 1e-9;

fn pair_overlap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ox = (a.m_offset + a.m_scale).min(b.m_offset + b.m_scale) - a.m_offset.max(b.m_offset);
    let oy = (a.n_offset + a.n_scale).min(b.n_offset + b.n_scale) - a.n_offset.max(b.n_offset);
    if ox > OVERLAP_TOL && oy > OVERLAP_TOL {
        ox * oy
    } else {
        0.0
    }
}

/// First direction (in the fixed left/right/above/below order) that the two
/// boxes already satisfy within `tol`.
fn holding_direction(a: &BoundingBox, b: &BoundingBox, tol: f64) -> Option<Direction> {
    Direction::ALL.into_iter().find(|d| match d {
        Direction::Left => a.m_offset + a.m_scale <= b.m_offset + tol,
        Direction::Right => b.m_offset + b.m_scale <= a.m_offset + tol,
        Direction::Above => a.n_offset + a.n_scale <= b.n_offset + tol,
        Direction::Below => b.n_offset + b.n_scale <= a.n_offset + tol,
    })
}

struct Search<'a> {
    problem: &'a LayoutProblem,
    base: Vec<Constraint>,
    objective: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    best: Option<(f64, Vec<f64>)>,
    lp_failures: usize,
}

impl<'a> Search<'a> {
    fn solve_node(&self, extra: &[Constraint]) -> LpOutcome {
        let mut cons = self.base.clone();
        cons.extend_from_slice(extra);
        simplex::solve(self.objective.len(), &self.objective, &cons)
    }

    fn descend(&mut self, decided: &mut Vec<(usize, Direction)>, cons: &mut Vec<Constraint>) {
        let outcome = {
            let mut all = self.base.clone();
            all.extend(cons.iter().cloned());
            simplex::solve(self.objective.len(), &self.objective, &all)
        };
        let (x, obj) = match outcome {
            LpOutcome::Optimal { x, objective } => (x, objective),
            LpOutcome::Infeasible => return,
            LpOutcome::Unbounded | LpOutcome::Failed => {
                self.lp_failures += 1;
                return;
            }
        };
        if let Some((best_obj, _)) = &self.best {
            if obj >= *best_obj - 1e-9 {
                return;
            }
        }

        let n = self.problem.targets.len();
        let boxes = boxes_from_lp(n, &x);
        let decided_set: Vec<usize> = decided.iter().map(|(p, _)| *p).collect();
        let mut worst: Option<(usize, f64)> = None;
        for (idx, (i, j)) in self.pairs.iter().enumerate() {
            if decided_set.contains(&idx) {
                continue;
            }
            let overlap = pair_overlap(&boxes[*i], &boxes[*j]);
            if overlap > 0.0 && worst.map_or(true, |(_, w)| overlap > w) {
                worst = Some((idx, overlap));
            }
        }

        match worst {
            None => {
                let better = self
                    .best
                    .as_ref()
                    .map_or(true, |(best_obj, _)| obj < *best_obj - 1e-12);
                if better {
                    self.best = Some((obj, x));
                }
            }
            Some((pair_idx, _)) => {
                let nv = self.objective.len();
                let (i, j) = self.pairs[pair_idx];
                for d in Direction::ALL {
                    decided.push((pair_idx, d));
                    cons.push(separation_constraint(nv, i, j, d));
                    self.descend(decided, cons);
                    cons.pop();
                    decided.pop();
                }
            }
        }
    }
}

/// Globally optimal solution of the linearized layout program via
/// branch-and-bound over the pairwise separation directions.
///
/// Among optimal solutions the returned one is canonicalized to the
/// lexicographically smallest `(m_offset, n_offset)` vector across boxes in
/// order, so identical problems always yield identical solutions.
pub fn solve_layout(problem: &LayoutProblem) -> Result<LayoutSolution, LayoutError> {
    problem.validate()?;
    let n = problem.targets.len();
    let base = base_constraints(problem);
    let objective = objective_vector(n);

    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }

    let mut search = Search {
        problem,
        base,
        objective,
        pairs,
        best: None,
        lp_failures: 0,
    };

    // Classify an empty root before searching: single-box infeasibility is a
    // geometry problem, not a packing problem.
    match search.solve_node(&[]) {
        LpOutcome::Infeasible => {
            return Err(LayoutError::Infeasible {
                family: InfeasibleFamily::Geometry,
            })
        }
        LpOutcome::Unbounded | LpOutcome::Failed => {
            return Err(LayoutError::Internal("root LP failed".into()))
        }
        LpOutcome::Optimal { .. } => {}
    }

    search.descend(&mut Vec::new(), &mut Vec::new());
    if search.lp_failures > 0 {
        return Err(LayoutError::Internal(format!(
            "{} node LPs failed numerically",
            search.lp_failures
        )));
    }
    let (best_obj, best_x) = search.best.ok_or(LayoutError::Infeasible {
        family: InfeasibleFamily::NonOverlap,
    })?;

    finish_solution(problem, best_obj, best_x)
}

/// Pins the returned vertex down to the lexicographic minimum over the
/// optimal face, then derives the reported separation directions.
fn finish_solution(
    problem: &LayoutProblem,
    _best_obj: f64,
    best_x: Vec<f64>,
) -> Result<LayoutSolution, LayoutError> {
    let n = problem.targets.len();
    let nv = n * VARS_PER_BOX;
    let boxes = boxes_from_lp(n, &best_x);

    let mut cons = base_constraints(problem);
    let mut separation = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = holding_direction(&boxes[i], &boxes[j], 1e-7).ok_or_else(|| {
                LayoutError::Internal(format!("incumbent boxes {i} and {j} overlap"))
            })?;
            separation.push(PairSeparation(i, j, d));
            cons.push(separation_constraint(nv, i, j, d));
        }
    }

    let incumbent = |refined: &[f64]| {
        let boxes = boxes_from_lp(n, refined);
        let objective = l1_objective(&boxes, &problem.targets);
        LayoutSolution {
            boxes,
            objective,
            separation: separation.clone(),
        }
    };

    // Re-minimize under the hardened directions so the cap below carries no
    // branch-and-bound slack, then walk the optimal face lexicographically.
    let objective_row = objective_vector(n);
    let mut refined = match simplex::solve(nv, &objective_row, &cons) {
        LpOutcome::Optimal { x, objective } => {
            cons.push(Constraint::le(objective_row, objective + 1e-9));
            x
        }
        _ => return Ok(incumbent(&best_x)),
    };
    for i in 0..n {
        for which in [X0, Y0] {
            let mut c = vec![0.0; nv];
            c[var(i, which)] = 1.0;
            match simplex::solve(nv, &c, &cons) {
                LpOutcome::Optimal { x, objective } => {
                    refined = x;
                    cons.push(Constraint::le(c, objective + 1e-9));
                }
                // Tolerance stacking can starve the refinement LP; the
                // incumbent is still optimal, so fall back to it.
                _ => return Ok(incumbent(&refined)),
            }
        }
    }
    Ok(incumbent(&refined))
}

/// Reference solver: enumerates one separation direction per pair and takes
/// the best pure LP. Exponential in the number of pairs (`4^(n(n-1)/2)`), so
/// it is limited to `n <= 3`; it exists to cross-check [`solve_layout`].
pub fn solve_layout_exhaustive(problem: &LayoutProblem) -> Result<LayoutSolution, LayoutError> {
    problem.validate()?;
    let n = problem.targets.len();
    if n > 3 {
        return Err(LayoutError::InvalidProblem(format!(
            "exhaustive reference handles n <= 3, got {n}"
        )));
    }
    let base = base_constraints(problem);
    let objective = objective_vector(n);
    let nv = n * VARS_PER_BOX;

    if simplex::solve(nv, &objective, &base) == LpOutcome::Infeasible {
        return Err(LayoutError::Infeasible {
            family: InfeasibleFamily::Geometry,
        });
    }

    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let assignments = 4usize.pow(pairs.len() as u32);
    for code in 0..assignments {
        let mut cons = base.clone();
        let mut rest = code;
        for (i, j) in &pairs {
            let d = Direction::ALL[rest % 4];
            rest /= 4;
            cons.push(separation_constraint(nv, *i, *j, d));
        }
        match simplex::solve(nv, &objective, &cons) {
            LpOutcome::Optimal { x, objective: obj } => {
                if best.as_ref().map_or(true, |(b, _)| obj < *b - 1e-12) {
                    best = Some((obj, x));
                }
            }
            LpOutcome::Infeasible => {}
            LpOutcome::Unbounded | LpOutcome::Failed => {
                return Err(LayoutError::Internal("enumeration LP failed".into()))
            }
        }
    }

    let (obj, x) = best.ok_or(LayoutError::Infeasible {
        family: InfeasibleFamily::NonOverlap,
    })?;
    let boxes = boxes_from_lp(n, &x);
    let mut separation = Vec::new();
    for idx in 0..pairs.len() {
        let (i, j) = pairs[idx];
        let d = holding_direction(&boxes[i], &boxes[j], 1e-7).ok_or_else(|| {
            LayoutError::Internal(format!("enumeration boxes {i} and {j} overlap"))
        })?;
        separation.push(PairSeparation(i, j, d));
    }
    Ok(LayoutSolution {
        boxes,
        objective: obj,
        separation,
    })
}

/// One independently checkable constraint violation.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Containment { box_index: usize, detail: String },
    MinArea { box_index: usize, area: f64 },
    AspectRatio { box_index: usize, ratio: f64 },
    NonOverlap { i: usize, j: usize },
    Objective { reported: f64, recomputed: f64 },
    BoxCount { expected: usize, got: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Containment { box_index, detail } => {
                write!(f, "containment: box {box_index} {detail}")
            }
            Violation::MinArea { box_index, area } => {
                write!(f, "min-area: box {box_index} has area {area}")
            }
            Violation::AspectRatio { box_index, ratio } => {
                write!(f, "aspect-ratio: box {box_index} has ratio {ratio}")
            }
            Violation::NonOverlap { i, j } => write!(f, "non-overlap: boxes {i} and {j} intersect"),
            Violation::Objective {
                reported,
                recomputed,
            } => write!(f, "objective: reported {reported}, recomputed {recomputed}"),
            Violation::BoxCount { expected, got } => {
                write!(f, "box count: expected {expected}, got {got}")
            }
        }
    }
}

const VERIFY_TOL: f64 = 1e-6;

/// Independent checker of the true (non-linearized) constraints: containment,
/// bilinear area, aspect bounds, pairwise interior disjointness, and the
/// objective recomputation, each at tolerance 1e-6.
pub fn verify_layout(solution: &LayoutSolution, problem: &LayoutProblem) -> Vec<Violation> {
    let mut violations = Vec::new();
    let n = problem.targets.len();
    if solution.boxes.len() != n {
        violations.push(Violation::BoxCount {
            expected: n,
            got: solution.boxes.len(),
        });
        return violations;
    }

    for (i, b) in solution.boxes.iter().enumerate() {
        let mut bad = Vec::new();
        if b.m_offset < -VERIFY_TOL || b.n_offset < -VERIFY_TOL {
            bad.push("offset below 0".to_string());
        }
        if b.m_scale < -VERIFY_TOL || b.n_scale < -VERIFY_TOL {
            bad.push("negative extent".to_string());
        }
        if b.m_offset + b.m_scale > 1.0 + VERIFY_TOL || b.n_offset + b.n_scale > 1.0 + VERIFY_TOL {
            bad.push("extends past 1".to_string());
        }
        for detail in bad {
            violations.push(Violation::Containment {
                box_index: i,
                detail,
            });
        }
        if b.area() < problem.a_min - VERIFY_TOL {
            violations.push(Violation::MinArea {
                box_index: i,
                area: b.area(),
            });
        }
        let ratio = if b.n_scale.abs() > 0.0 {
            b.m_scale / b.n_scale
        } else {
            f64::INFINITY
        };
        if b.m_scale < problem.r_min * b.n_scale - VERIFY_TOL
            || b.m_scale > problem.r_max * b.n_scale + VERIFY_TOL
        {
            violations.push(Violation::AspectRatio { box_index: i, ratio });
        }
    }

    for i in 0..solution.boxes.len() {
        for j in (i + 1)..solution.boxes.len() {
            let (a, b) = (&solution.boxes[i], &solution.boxes[j]);
            let ox = (a.m_offset + a.m_scale).min(b.m_offset + b.m_scale)
                - a.m_offset.max(b.m_offset);
            let oy = (a.n_offset + a.n_scale).min(b.n_offset + b.n_scale)
                - a.n_offset.max(b.n_offset);
            if ox > VERIFY_TOL && oy > VERIFY_TOL {
                violations.push(Violation::NonOverlap { i, j });
            }
        }
    }

    let recomputed = l1_objective(&solution.boxes, &problem.targets);
    if (recomputed - solution.objective).abs() > VERIFY_TOL {
        violations.push(Violation::Objective {
            reported: solution.objective,
            recomputed,
        });
    }
    violations
}

/// Rasterizes boxes onto a grid: a pixel belongs to a mask when its center
/// `((x + 0.5) / width, (y + 0.5) / height)` lies inside the box, left and
/// bottom edges inclusive. Row `y = 0` sits at the bottom edge of the unit
/// square.
pub fn boxes_to_masks(boxes: &[BoundingBox], height: usize, width: usize) -> Vec<AttentionMap> {
    assert!(height >= 1 && width >= 1, "dims must be positive");
    boxes
        .iter()
        .map(|b| {
            let mut values = vec![0.0; height * width];
            for y in 0..height {
                let cy = (y as f64 + 0.5) / height as f64;
                for x in 0..width {
                    let cx = (x as f64 + 0.5) / width as f64;
                    if b.contains_half_open(cx, cy) {
                        values[y * width + x] = 1.0;
                    }
                }
            }
            AttentionMap::new(height, width, values).expect("mask values are 0/1")
        })
        .collect()
}

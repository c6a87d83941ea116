//! Branch tracing over the rotation rate.
//!
//! Roots found on the Ω grid are linked by following the solution curve of
//! the reduced system F(Ω, α₁, α₂) = (r₂, r₃) = 0 with pseudo-arclength
//! continuation. Each grid crossing of the curve is matched to its nearest
//! grid root. The curve is cut into branches (pieces that are graphs over Ω)
//! at fold points, where two roots merge, and it ends where a width reaches
//! zero or the curve leaves the scan interval.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::roots::{find_all_roots, newton};
use super::{ContinuationSettings, Reduced, StationaritySystem};
use crate::error::{Error, Result};
use crate::model::{StationaryPoint, TrapConfig};

const MAX_STEPS: usize = 200_000;
const MIN_STEP_FRACTION: f64 = 1e-7;
const MIN_TANGENT_COSINE: f64 = 0.95;

type Pt = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    /// Two branches meet and annihilate.
    Fold,
    /// A branch reaches the edge α₁ = 0 (`vanishing = 1`) or α₂ = 0 (`vanishing = 2`).
    Boundary { vanishing: u8 },
}

/// A rotation rate at which the number of stationary points changes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEvent {
    pub kind: TransitionKind,
    pub omega: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    /// Rotation rates of the two curve points that bracket the event after
    /// refinement, widened by a roundoff margin.
    pub omega_bracket: (f64, f64),
    /// Branches meeting at the event (two for a fold, one at the boundary).
    pub branches: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchEnd {
    /// The branch continues past the scan interval.
    ScanEdge,
    /// Index into [`BranchScan::events`].
    Event(usize),
    /// The curve closed on itself.
    Closed,
    /// Continuation broke down at the given rotation rate.
    Lost { omega: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: usize,
    /// Ω interval covered by the branch.
    pub omega_range: (f64, f64),
    /// Both ends, in the order the curve was traversed.
    pub ends: [BranchEnd; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplicityInterval {
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub count: usize,
}

/// Stationary points over an Ω grid, grouped into continuous branches.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchScan {
    /// Trap and nonlinearity; its rotation rate is zero and meaningless here.
    pub config: TrapConfig,
    pub omega_grid: Vec<f64>,
    /// All points, ordered by Ω and then branch id.
    pub points: Vec<StationaryPoint>,
    /// Number of distinct stationary points at each grid rotation rate.
    pub multiplicity: Vec<usize>,
    pub branches: Vec<Branch>,
    pub events: Vec<TransitionEvent>,
}

impl BranchScan {
    /// Points with the given grid rotation rate.
    pub fn points_at(&self, grid_index: usize) -> impl Iterator<Item = &StationaryPoint> {
        let w = self.omega_grid[grid_index];
        self.points.iter().filter(move |p| p.omega == w)
    }

    pub fn branch_points(&self, id: usize) -> impl Iterator<Item = &StationaryPoint> {
        self.points.iter().filter(move |p| p.branch_id == Some(id))
    }

    pub fn folds(&self) -> impl Iterator<Item = &TransitionEvent> {
        self.events.iter().filter(|e| e.kind == TransitionKind::Fold)
    }

    /// Number of stationary points on maximal Ω intervals between events,
    /// counted from the branch extents.
    pub fn multiplicity_intervals(&self) -> Vec<MultiplicityInterval> {
        let lo = self.omega_grid[0];
        let hi = *self.omega_grid.last().expect("non-empty grid");
        let mut cuts: Vec<f64> = self
            .events
            .iter()
            .map(|e| e.omega)
            .chain(self.branches.iter().filter_map(|b| {
                b.ends.iter().find_map(|e| match e {
                    BranchEnd::Lost { omega } => Some(*omega),
                    _ => None,
                })
            }))
            .filter(|w| *w > lo && *w < hi)
            .collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let mut out: Vec<MultiplicityInterval> = Vec::new();
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let count = self
                .branches
                .iter()
                .filter(|b| b.omega_range.0 < mid && mid < b.omega_range.1)
                .count();
            match out.last_mut() {
                Some(last) if last.count == count => last.omega_hi = w[1],
                _ => out.push(MultiplicityInterval { omega_lo: w[0], omega_hi: w[1], count }),
            }
        }
        out
    }

    /// Human-readable report of multiplicity intervals and transitions.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(
            s,
            "# stationary scan: omega1 = {:.17e}, omega2 = {:.17e}, b = {:.17e}",
            c.omega1(),
            c.omega2(),
            c.b()
        );
        let _ = writeln!(
            s,
            "# grid: {} rotation rates on [{}, {}]",
            self.omega_grid.len(),
            self.omega_grid[0],
            self.omega_grid.last().unwrap()
        );
        let _ = writeln!(s, "multiplicity intervals:");
        for iv in self.multiplicity_intervals() {
            let _ = writeln!(s, "  [{:.10}, {:.10}] count {}", iv.omega_lo, iv.omega_hi, iv.count);
        }
        let _ = writeln!(s, "transitions:");
        for e in &self.events {
            let kind = match e.kind {
                TransitionKind::Fold => "fold".to_string(),
                TransitionKind::Boundary { vanishing } => format!("boundary alpha{vanishing}=0"),
            };
            let _ = writeln!(
                s,
                "  {kind} at Omega = {:.12} (bracket [{:.12}, {:.12}]), alpha1 = {:.9}, alpha2 = {:.9}, beta = {:.9}, branches {:?}",
                e.omega,
                e.omega_bracket.0,
                e.omega_bracket.1,
                e.alpha1,
                e.alpha2,
                e.beta,
                e.branches
            );
        }
        for b in &self.branches {
            for end in &b.ends {
                if let BranchEnd::Lost { omega } = end {
                    let _ = writeln!(s, "  warning: branch {} lost at Omega = {omega}", b.id);
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
enum Item {
    Crossing { grid: usize, point: Pt },
    Fold { point: Pt, bracket: (f64, f64) },
}

#[derive(Debug, Clone)]
enum LegEnd {
    Edge { omega: f64 },
    Boundary { vanishing: u8, point: Pt, bracket: (f64, f64) },
    Closed,
    Lost { point: Pt },
}

#[derive(Debug, Clone)]
struct Leg {
    items: Vec<Item>,
    end: LegEnd,
}

struct Tracer<'a> {
    red: Reduced,
    settings: &'a ContinuationSettings,
    grid: &'a [f64],
    alpha_cap: f64,
}

impl Tracer<'_> {
    fn residual(&self, x: &Pt) -> f64 {
        self.red.residual(x[0], x[1], x[2])
    }

    fn rows(&self, x: &Pt) -> (Pt, Pt) {
        let j = self.red.jacobian(x[0], x[1], x[2]);
        (Vector3::from(j[0]), Vector3::from(j[1]))
    }

    /// Unit tangent of the solution curve, oriented along `reference`.
    fn tangent(&self, x: &Pt, reference: &Pt) -> Option<Pt> {
        let (g2, g3) = self.rows(x);
        let t = g2.cross(&g3);
        let n = t.norm();
        if !(n > 0.0 && n.is_finite()) {
            return None;
        }
        let t = t / n;
        Some(if t.dot(reference) < 0.0 { -t } else { t })
    }

    /// Newton on F = 0 restricted to the hyperplane through `pred` normal to `normal`.
    fn correct(&self, pred: &Pt, normal: &Pt) -> Option<Pt> {
        let mut x = *pred;
        for _ in 0..self.settings.newton_max_iter {
            if x[1] + x[2] <= 0.0 || !x.iter().all(|v| v.is_finite()) {
                return None;
            }
            let f = self.red.eval(x[0], x[1], x[2]);
            let c = normal.dot(&(x - pred));
            if self.residual(&x) < self.settings.newton_tol && c.abs() < 1e-12 {
                return Some(x);
            }
            let (g2, g3) = self.rows(&x);
            let m = Matrix3::from_rows(&[g2.transpose(), g3.transpose(), normal.transpose()]);
            let dx = m.lu().solve(&Vector3::new(-f[0], -f[1], -c))?;
            x += dx;
        }
        (self.residual(&x) < self.settings.newton_tol).then_some(x)
    }

    /// Exact grid crossing between two curve points `a`, `b` at rotation `w`.
    fn crossing(&self, a: &Pt, b: &Pt, w: f64) -> Option<Pt> {
        let chord = b - a;
        let len = chord.norm();
        let lam = (w - a[0]) / (b[0] - a[0]);
        let guess = a + chord * lam;
        let near = |p: &Pt| (p - a).norm() <= 1.5 * len + 1e-12 && (p - b).norm() <= 1.5 * len + 1e-12;
        if let Some((a1, a2)) = newton(&self.red, w, (guess[1], guess[2]), self.settings.newton_tol, self.settings.newton_max_iter) {
            let p = Vector3::new(w, a1, a2);
            if near(&p) {
                return Some(p);
            }
        }
        // fall back to bisection along the chord
        let dir = chord / len;
        let (mut lo, mut hi) = (0.0, 1.0);
        let side = |p: &Pt| (p[0] - w) * (a[0] - w) > 0.0;
        let mut best = *a;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let p = self.correct(&(a + chord * mid), &dir)?;
            best = p;
            if (p[0] - w).abs() < 1e-14 {
                break;
            }
            if side(&p) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (a1, a2) = newton(&self.red, w, (best[1], best[2]), self.settings.newton_tol, self.settings.newton_max_iter)?;
        Some(Vector3::new(w, a1, a2))
    }

    fn push_crossings(&self, a: &Pt, b: &Pt, items: &mut Vec<Item>) -> std::result::Result<(), Pt> {
        let (w0, w1) = (a[0], b[0]);
        let mut hits: Vec<usize> = (0..self.grid.len())
            .filter(|&i| {
                let w = self.grid[i];
                (w - w0) * (w - w1) < 0.0 || w == w1
            })
            .collect();
        if w1 < w0 {
            hits.reverse();
        }
        for i in hits {
            let p = self.crossing(a, b, self.grid[i]).ok_or(*a)?;
            items.push(Item::Crossing { grid: i, point: p });
        }
        Ok(())
    }

    /// Bisects the arclength in [0, h] from `x` along `t` for the first
    /// point where `flipped` becomes true. Returns that point and the Ω
    /// values of the final bracketing pair.
    fn bisect(&self, x: &Pt, t: &Pt, h: f64, flipped: impl Fn(&Pt) -> Option<bool>) -> Option<(Pt, (f64, f64))> {
        let (mut lo, mut hi) = (0.0, h);
        let mut p_lo = *x;
        let mut p_hi = None;
        while hi - lo > 1e-14 * h.max(1.0) {
            let mid = 0.5 * (lo + hi);
            let p = self.correct(&(x + t * mid), t)?;
            if flipped(&p)? {
                hi = mid;
                p_hi = Some(p);
            } else {
                lo = mid;
                p_lo = p;
            }
        }
        let p_hi = match p_hi {
            Some(p) => p,
            None => self.correct(&(x + t * hi), t)?,
        };
        let margin = 1e-12 * (1.0 + p_hi[0].abs());
        let bracket = (p_lo[0].min(p_hi[0]) - margin, p_lo[0].max(p_hi[0]) + margin);
        Some((p_hi, bracket))
    }

    fn trace_leg(&self, x0: Pt, dir: f64) -> Leg {
        let s = self.settings;
        let (omega_lo, omega_hi) = (self.grid[0], *self.grid.last().unwrap());
        let h_min = s.arc_step * MIN_STEP_FRACTION;
        let mut items = Vec::new();
        let lost = |items: Vec<Item>, point: Pt| Leg { items, end: LegEnd::Lost { point } };

        let mut t = match self.tangent(&x0, &Vector3::new(dir, 0.0, 0.0)) {
            Some(t) => t,
            None => return lost(items, x0),
        };
        let mut x = x0;
        let mut h = s.arc_step;
        let mut travelled = 0.0;
        for _ in 0..MAX_STEPS {
            let xn = match self.correct(&(x + t * h), &t) {
                Some(p) if (p - x).norm() < 2.0 * h => p,
                _ => {
                    h *= 0.5;
                    if h < h_min {
                        return lost(items, x);
                    }
                    continue;
                }
            };
            let tn = match self.tangent(&xn, &t) {
                Some(v) => v,
                None => return lost(items, x),
            };
            if tn.dot(&t) < MIN_TANGENT_COSINE && h > h_min * 16.0 {
                h *= 0.5;
                continue;
            }

            if xn[1] <= 0.0 || xn[2] <= 0.0 {
                let vanishing = if xn[1] <= 0.0 { 1 } else { 2 };
                let k = vanishing as usize;
                let Some((pb, bracket)) = self.bisect(&x, &t, h, |p| Some(p[k] <= 0.0)) else {
                    return lost(items, x);
                };
                if self.push_crossings(&x, &pb, &mut items).is_err() {
                    return lost(items, x);
                }
                return Leg { items, end: LegEnd::Boundary { vanishing, point: pb, bracket } };
            }

            if tn[0] * t[0] < 0.0 {
                let Some((pf, bracket)) = self.bisect(&x, &t, h, |p| self.tangent(p, &t).map(|tp| tp[0] * t[0] <= 0.0)) else {
                    return lost(items, x);
                };
                if self.push_crossings(&x, &pf, &mut items).is_err() {
                    return lost(items, x);
                }
                items.push(Item::Fold { point: pf, bracket });
                if self.push_crossings(&pf, &xn, &mut items).is_err() {
                    return lost(items, pf);
                }
            } else if self.push_crossings(&x, &xn, &mut items).is_err() {
                return lost(items, x);
            }

            if xn[0] < omega_lo {
                return Leg { items, end: LegEnd::Edge { omega: omega_lo } };
            }
            if xn[0] > omega_hi {
                return Leg { items, end: LegEnd::Edge { omega: omega_hi } };
            }
            if xn[1] > self.alpha_cap || xn[2] > self.alpha_cap {
                return lost(items, xn);
            }
            travelled += (xn - x).norm();
            if travelled > 10.0 * s.arc_step && (xn - x0).norm() < h {
                return Leg { items, end: LegEnd::Closed };
            }
            x = xn;
            t = tn;
            h = (h * 1.3).min(s.arc_step);
        }
        lost(items, x)
    }
}

struct Assembly {
    branches: Vec<Branch>,
    events: Vec<TransitionEvent>,
}

impl Assembly {
    fn new_branch(&mut self, start: BranchEnd, start_omega: f64) -> usize {
        let id = self.branches.len();
        self.branches.push(Branch {
            id,
            omega_range: (start_omega, start_omega),
            ends: [start, BranchEnd::ScanEdge],
        });
        id
    }

    fn extend(&mut self, id: usize, omega: f64) {
        let r = &mut self.branches[id].omega_range;
        r.0 = r.0.min(omega);
        r.1 = r.1.max(omega);
    }

    fn event(&mut self, kind: TransitionKind, p: &Pt, bracket: (f64, f64), branches: Vec<usize>) -> usize {
        self.events.push(TransitionEvent {
            kind,
            omega: p[0],
            alpha1: p[1],
            alpha2: p[2],
            beta: Reduced::beta(p[0], p[1], p[2]),
            omega_bracket: bracket,
            branches,
        });
        self.events.len() - 1
    }

    /// Converts the end of a leg into a branch end (creating events as needed).
    fn close(&mut self, end: &LegEnd, id: usize) -> (BranchEnd, f64) {
        match end {
            LegEnd::Edge { omega } => (BranchEnd::ScanEdge, *omega),
            LegEnd::Boundary { vanishing, point, bracket } => {
                let e = self.event(TransitionKind::Boundary { vanishing: *vanishing }, point, *bracket, vec![id]);
                (BranchEnd::Event(e), point[0])
            }
            LegEnd::Closed => (BranchEnd::Closed, f64::NAN),
            LegEnd::Lost { point } => (BranchEnd::Lost { omega: point[0] }, point[0]),
        }
    }
}

/// Finds all roots on the Ω grid of `settings` and groups them into branches.
pub fn trace_branches(config: &TrapConfig, settings: &ContinuationSettings) -> Result<BranchScan> {
    StationaritySystem::new(*config)?;
    settings.validate()?;
    let base = config.with_rotation(0.0)?;
    let grid = settings.omega_grid();
    let mut roots: Vec<Vec<StationaryPoint>> = grid
        .par_iter()
        .map(|&w| find_all_roots(&base.with_rotation(w)?, settings))
        .collect::<Result<_>>()?;
    let mut owner: Vec<Vec<Option<usize>>> = roots.iter().map(|r| vec![None; r.len()]).collect();

    let tracer = Tracer {
        red: Reduced::new(&base),
        settings,
        grid: &grid,
        alpha_cap: 4.0 * settings.alpha_max_for(&base),
    };
    let mut asm = Assembly {
        branches: Vec::new(),
        events: Vec::new(),
    };

    for i in 0..grid.len() {
        let mut j = 0;
        while j < roots[i].len() {
            if owner[i][j].is_some() {
                j += 1;
                continue;
            }
            let x0 = Vector3::new(grid[i], roots[i][j].alpha1, roots[i][j].alpha2);
            let fwd = tracer.trace_leg(x0, 1.0);
            let bwd = match fwd.end {
                LegEnd::Closed => Leg { items: Vec::new(), end: LegEnd::Closed },
                _ => tracer.trace_leg(x0, -1.0),
            };

            let mut sequence: Vec<Item> = bwd.items.iter().rev().cloned().collect();
            sequence.push(Item::Crossing { grid: i, point: x0 });
            sequence.extend(fwd.items.iter().cloned());

            let first = asm.new_branch(BranchEnd::ScanEdge, x0[0]);
            let (start_end, start_omega) = asm.close(&bwd.end, first);
            asm.branches[first].ends[0] = start_end;
            if start_omega.is_finite() {
                asm.extend(first, start_omega);
            }
            let mut current = first;
            for item in &sequence {
                match item {
                    Item::Crossing { grid: g, point } => {
                        asm.extend(current, point[0]);
                        link(&tracer.red, &mut roots, &mut owner, *g, point, current, settings.dedupe_radius)?;
                    }
                    Item::Fold { point, bracket } => {
                        asm.extend(current, point[0]);
                        let next = asm.new_branch(BranchEnd::ScanEdge, point[0]);
                        let e = asm.event(TransitionKind::Fold, point, *bracket, vec![current, next]);
                        asm.branches[current].ends[1] = BranchEnd::Event(e);
                        asm.branches[next].ends[0] = BranchEnd::Event(e);
                        current = next;
                    }
                }
            }
            let (end, end_omega) = asm.close(&fwd.end, current);
            asm.branches[current].ends[1] = end;
            if end_omega.is_finite() {
                asm.extend(current, end_omega);
            }
            j += 1;
        }
    }

    let mut points = Vec::new();
    let mut multiplicity = Vec::with_capacity(grid.len());
    for (i, (rs, os)) in roots.iter().zip(&owner).enumerate() {
        multiplicity.push(rs.len());
        let mut here: Vec<StationaryPoint> = rs
            .iter()
            .zip(os)
            .map(|(p, o)| StationaryPoint { branch_id: *o, omega: grid[i], ..*p })
            .collect();
        here.sort_by_key(|p| p.branch_id);
        points.extend(here);
    }

    Ok(BranchScan {
        config: base,
        omega_grid: grid,
        points,
        multiplicity,
        branches: asm.branches,
        events: asm.events,
    })
}

/// Attaches a curve crossing to its grid root, inserting it when the
/// multi-start search missed it.
#[allow(clippy::too_many_arguments)]
fn link(
    red: &Reduced,
    roots: &mut [Vec<StationaryPoint>],
    owner: &mut [Vec<Option<usize>>],
    g: usize,
    point: &Pt,
    branch: usize,
    radius: f64,
) -> Result<()> {
    let w = point[0];
    let beta = Reduced::beta(w, point[1], point[2]);
    let cand = StationaryPoint::new(point[1], point[2], beta, w, red.residual(w, point[1], point[2]));
    let near: Vec<usize> = roots[g]
        .iter()
        .enumerate()
        .filter(|(_, p)| p.distance(&cand) < radius)
        .map(|(k, _)| k)
        .collect();
    match near.as_slice() {
        [] => {
            roots[g].push(cand);
            owner[g].push(Some(branch));
            Ok(())
        }
        [k] => match owner[g][*k] {
            None => {
                owner[g][*k] = Some(branch);
                Ok(())
            }
            Some(other) if other == branch => Ok(()),
            Some(other) => Err(Error::BranchAmbiguity {
                omega: w,
                detail: format!(
                    "root at alpha = ({:.9}, {:.9}) reached by branches {other} and {branch}",
                    point[1], point[2]
                ),
            }),
        },
        _ => Err(Error::BranchAmbiguity {
            omega: w,
            detail: format!("{} roots within the dedupe radius of a branch crossing", near.len()),
        }),
    }
}

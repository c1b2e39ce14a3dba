//! Attractor notions for skew-product flows and their numerical tests.
//!
//! Compact sets are represented by finite samples: a [`FiberedSet`] stores a
//! fixed number of "sheets" over a regular torus grid, each sheet being a
//! section interpolated between nodes, so fibers can be evaluated at any base
//! point. Three routes are provided:
//!
//! * fixed points of the section operator `ξ` (graph attractors),
//! * the pullback test, `sup_p H(τ̃_t(D_{τ_{−t}(p)}), A) → 0`,
//! * the Lyapunov test (attraction of a neighborhood plus stability).

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::base_flow::{BasePoint, TWO_PI};
use crate::cocycle::{flow_distance, FlowPoint, SkewProductFlow, TimeForm};
use crate::error::{Error, Result};
use crate::grid::{Interpolation, TorusGrid};

/// Directed distance `H*(K₁, K₂) = sup_{z₁∈K₁} inf_{z₂∈K₂} d(z₁, z₂)`.
pub fn directed_hausdorff(k1: &[FlowPoint], k2: &[FlowPoint]) -> Result<f64> {
    if k1.is_empty() || k2.is_empty() {
        return Err(Error::Domain("Hausdorff distance needs nonempty sets".into()));
    }
    Ok(k1
        .iter()
        .map(|a| k2.iter().map(|b| flow_distance(a, b)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max))
}

/// Hausdorff distance under `d(z₁, z₂) = d_𝔓(p₁, p₂) + |x₁ − x₂|`.
pub fn hausdorff(k1: &[FlowPoint], k2: &[FlowPoint]) -> Result<f64> {
    Ok(directed_hausdorff(k1, k2)?.max(directed_hausdorff(k2, k1)?))
}

/// Distance from `x` to a finite fiber over the same base point.
fn fiber_distance(x: &DVector<f64>, fiber: &[DVector<f64>]) -> f64 {
    fiber.iter().map(|a| (x - a).norm()).fold(f64::INFINITY, f64::min)
}

/// Hausdorff distance between two finite fibers over the same base point.
fn fiber_hausdorff(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let one = |u: &[DVector<f64>], v: &[DVector<f64>]| u.iter().map(|x| fiber_distance(x, v)).fold(0.0, f64::max);
    one(a, b).max(one(b, a))
}

/// A discretized continuous map `c: 𝔓 → V ⊂ ℝᵈ`, with `V` the open ball of
/// radius `chart_radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    grid: TorusGrid,
    values: Vec<DVector<f64>>,
    interp: Interpolation,
    chart_radius: f64,
}

impl Section {
    pub fn new(
        grid: TorusGrid,
        values: Vec<DVector<f64>>,
        interp: Interpolation,
        chart_radius: f64,
    ) -> Result<Self> {
        interp.validate()?;
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let d = values[0].len();
        if values.iter().any(|v| v.len() != d) {
            return Err(Error::Config("section values must share one dimension".into()));
        }
        if !(chart_radius > 0.0) {
            return Err(Error::Config("chart radius must be positive".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.norm() < chart_radius)) {
            return Err(Error::ChartViolation(format!(
                "section value with norm {} outside the chart of radius {chart_radius}",
                v.norm()
            )));
        }
        Ok(Self {
            grid,
            values,
            interp,
            chart_radius,
        })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn<F>(grid: TorusGrid, interp: Interpolation, chart_radius: f64, f: F) -> Result<Self>
    where
        F: Fn(&BasePoint) -> DVector<f64>,
    {
        let values = grid.nodes().iter().map(f).collect();
        Self::new(grid, values, interp, chart_radius)
    }

    pub fn constant(grid: TorusGrid, interp: Interpolation, chart_radius: f64, value: DVector<f64>) -> Result<Self> {
        Self::from_fn(grid, interp, chart_radius, |_| value.clone())
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interp
    }

    pub fn chart_radius(&self) -> f64 {
        self.chart_radius
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn eval(&self, p: &BasePoint) -> DVector<f64> {
        self.interp.eval(&self.grid, &self.values, p)
    }

    /// `ρ(c₁, c₂)` evaluated on the grid nodes.
    pub fn sup_distance(&self, other: &Section) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Config("sections live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Graph of the section as a one-sheet fibered set.
    pub fn graph(&self) -> FiberedSet {
        FiberedSet {
            grid: self.grid,
            sheets: vec![self.values.clone()],
            interp: self.interp,
        }
    }
}

/// Finite sampling of a compact `A ⊂ 𝔓 × ℝᵈ` organized by fibers. Every node
/// carries the same number of samples; sample `k` across nodes forms a sheet
/// which is interpolated like a section.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberedSet {
    grid: TorusGrid,
    sheets: Vec<Vec<DVector<f64>>>,
    interp: Interpolation,
}

impl FiberedSet {
    pub fn new(grid: TorusGrid, sheets: Vec<Vec<DVector<f64>>>, interp: Interpolation) -> Result<Self> {
        interp.validate()?;
        if sheets.is_empty() {
            return Err(Error::Domain("every fiber must be nonempty".into()));
        }
        if sheets.iter().any(|s| s.len() != grid.len()) {
            return Err(Error::Dimension {
                expected: grid.len(),
                got: sheets.iter().map(Vec::len).find(|&l| l != grid.len()).unwrap_or(0),
            });
        }
        Ok(Self { grid, sheets, interp })
    }

    /// Builds from per-node fibers (each the same length).
    pub fn from_fibers(grid: TorusGrid, fibers: Vec<Vec<DVector<f64>>>, interp: Interpolation) -> Result<Self> {
        if fibers.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                got: fibers.len(),
            });
        }
        let k = fibers.first().map_or(0, Vec::len);
        if k == 0 || fibers.iter().any(|f| f.len() != k) {
            return Err(Error::Domain("fibers must be nonempty and equally sampled".into()));
        }
        let sheets = (0..k).map(|j| fibers.iter().map(|f| f[j].clone()).collect()).collect();
        Self::new(grid, sheets, interp)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn samples_per_fiber(&self) -> usize {
        self.sheets.len()
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interp
    }

    pub fn fiber_at_node(&self, i: usize) -> Vec<DVector<f64>> {
        self.sheets.iter().map(|s| s[i].clone()).collect()
    }

    pub fn fiber_at(&self, p: &BasePoint) -> Vec<DVector<f64>> {
        self.sheets.iter().map(|s| self.interp.eval(&self.grid, s, p)).collect()
    }

    /// All samples as flow points.
    pub fn points(&self) -> Vec<FlowPoint> {
        (0..self.grid.len())
            .flat_map(|i| {
                let p = self.grid.node(i);
                self.sheets.iter().map(move |s| FlowPoint::new(p.clone(), s[i].clone()))
            })
            .collect()
    }

    pub fn bounding_radius(&self) -> f64 {
        self.sheets.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Every sample translated by `offset`.
    pub fn shifted(&self, offset: &DVector<f64>) -> FiberedSet {
        FiberedSet {
            grid: self.grid,
            sheets: self.sheets.iter().map(|s| s.iter().map(|v| v + offset).collect()).collect(),
            interp: self.interp,
        }
    }

    /// Union of fibers node by node (sheets concatenated).
    pub fn union(&self, other: &FiberedSet) -> Result<FiberedSet> {
        if self.grid != other.grid {
            return Err(Error::Config("fibered sets live on different grids".into()));
        }
        let mut sheets = self.sheets.clone();
        sheets.extend(other.sheets.iter().cloned());
        FiberedSet::new(self.grid, sheets, self.interp)
    }
}

/// `ξ(c)(p) = x-component of τ̃_{t₀}(τ_{−t₀}(p), c(τ_{−t₀}(p)))`.
pub fn xi_map(flow: &SkewProductFlow, c: &Section, t0: f64, form: TimeForm) -> Result<Section> {
    if !(t0 > 0.0) {
        return Err(Error::Domain(format!("t0 must be positive, got {t0}")));
    }
    let base = flow.base();
    let values: Vec<DVector<f64>> = (0..c.grid.len())
        .into_par_iter()
        .map(|i| {
            let q = base.advance_unchecked(&c.grid.node(i), -t0);
            let z = FlowPoint::new(q.clone(), c.eval(&q));
            match flow.evolve(&z, t0, form) {
                Ok(out) => Ok(out.x),
                Err(Error::Escape { t_exit }) => Err(Error::ChartViolation(format!(
                    "fiber integration from node {i} escaped at t = {t_exit}"
                ))),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.norm() < c.chart_radius)) {
        return Err(Error::Hypothesis(format!(
            "τ̃_t0 maps node {i} outside V (|x| = {} ≥ {})",
            v.norm(),
            c.chart_radius
        )));
    }
    Ok(Section {
        grid: c.grid,
        values,
        interp: c.interp,
        chart_radius: c.chart_radius,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Ratios from the first `warmup` steps are ignored for `alpha_hat`.
    pub warmup: usize,
    /// Ratios are only recorded while the previous step exceeds this.
    pub noise_floor: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            warmup: 1,
            noise_floor: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub section: Section,
    pub alpha_hat: f64,
    pub iterations: usize,
    /// `ρ(c_{k+1}, c_k)` for each step.
    pub steps: Vec<f64>,
    /// `ρ(c_k, a)` for every iterate, `a` the returned limit.
    pub distance_to_limit: Vec<f64>,
}

impl FixedPointResult {
    pub fn attractor(&self) -> FiberedSet {
        self.section.graph()
    }
}

/// Iterates `ξ` from `c0` until `ρ(c_{k+1}, c_k) ≤ tol`.
pub fn fixed_point_section(
    flow: &SkewProductFlow,
    c0: &Section,
    t0: f64,
    form: TimeForm,
    opts: &FixedPointOptions,
) -> Result<FixedPointResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let mut iterates = vec![c0.clone()];
    let mut steps = Vec::new();
    let mut alpha_hat: f64 = 0.0;
    loop {
        let k = steps.len();
        if k >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations: k,
                last_change: steps.last().copied().unwrap_or(f64::NAN),
            });
        }
        let next = xi_map(flow, iterates.last().expect("nonempty"), t0, form)?;
        let step = next.sup_distance(iterates.last().expect("nonempty"))?;
        iterates.push(next);
        steps.push(step);
        if k >= opts.warmup.max(1) && steps[k - 1] > opts.noise_floor {
            alpha_hat = alpha_hat.max(step / steps[k - 1]);
            if alpha_hat >= 1.0 {
                return Err(Error::NotAContraction { alpha_hat });
            }
        }
        if step <= opts.tol {
            break;
        }
    }
    let limit = iterates.last().expect("nonempty").clone();
    let distance_to_limit = iterates
        .iter()
        .map(|c| c.sup_distance(&limit))
        .collect::<Result<Vec<_>>>()?;
    Ok(FixedPointResult {
        section: limit,
        alpha_hat,
        iterations: steps.len(),
        steps,
        distance_to_limit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestVerdict {
    Pass,
    Fail,
}

impl TestVerdict {
    pub fn passed(self) -> bool {
        self == TestVerdict::Pass
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            TestVerdict::Pass
        } else {
            TestVerdict::Fail
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttractorReport {
    pub verdict: TestVerdict,
    /// `(t, sup_p H)` with strictly increasing `t`.
    pub convergence_curve: Vec<(f64, f64)>,
    pub worst_point: Option<BasePoint>,
    pub worst_time: Option<f64>,
    pub notes: Vec<String>,
}

impl AttractorReport {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    pub fn final_value(&self) -> Option<f64> {
        self.convergence_curve.last().map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullbackOptions {
    pub tol: f64,
    /// Allowed relative increase between consecutive curve values.
    pub slack: f64,
    /// Absolute allowance for rounding-level wiggles.
    pub noise_floor: f64,
}

impl Default for PullbackOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            slack: 0.1,
            noise_floor: 1e-8,
        }
    }
}

/// Pushes the fibers `D(τ_{−t}(p))` forward by `t` and measures the distance
/// to `A_p`, for every grid node `p` and every `t` in `t_list`.
pub fn pullback_test(
    flow: &SkewProductFlow,
    a: &FiberedSet,
    d: &FiberedSet,
    t_list: &[f64],
    form: TimeForm,
    opts: &PullbackOptions,
) -> Result<AttractorReport> {
    if t_list.is_empty() || t_list.windows(2).any(|w| !(w[1] > w[0])) || t_list[0] < 0.0 {
        return Err(Error::Domain("t_list must be nonnegative and strictly increasing".into()));
    }
    let base = flow.base();
    let grid = *a.grid();
    let mut curve = Vec::with_capacity(t_list.len());
    let mut worst = (f64::NEG_INFINITY, None, None);
    let mut notes = Vec::new();
    for &t in t_list {
        let per_node: Vec<Result<f64>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let p = grid.node(i);
                let q = base.advance_unchecked(&p, -t);
                let pushed = d
                    .fiber_at(&q)
                    .into_iter()
                    .map(|x| flow.evolve(&FlowPoint::new(q.clone(), x), t, form).map(|z| z.x))
                    .collect::<Result<Vec<_>>>()?;
                Ok(fiber_hausdorff(&pushed, &a.fiber_at_node(i)))
            })
            .collect();
        let mut sup: f64 = 0.0;
        for (i, r) in per_node.into_iter().enumerate() {
            match r {
                Ok(h) => {
                    if h > sup {
                        sup = h;
                    }
                    if h > worst.0 {
                        worst = (h, Some(grid.node(i)), Some(t));
                    }
                }
                Err(Error::Escape { t_exit }) => {
                    notes.push(format!("escape from node {i} at t = {t_exit} (pull-back time {t})"));
                    return Ok(AttractorReport {
                        verdict: TestVerdict::Fail,
                        convergence_curve: curve,
                        worst_point: Some(grid.node(i)),
                        worst_time: Some(t),
                        notes,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        curve.push((t, sup));
    }
    let final_ok = curve.last().map_or(false, |&(_, v)| v <= opts.tol);
    let monotone = curve
        .windows(2)
        .all(|w| w[1].1 <= (1.0 + opts.slack) * w[0].1 + opts.noise_floor);
    if !final_ok {
        notes.push(format!("final distance above tolerance {}", opts.tol));
    }
    if !monotone {
        notes.push("curve increases beyond slack".into());
    }
    Ok(AttractorReport {
        verdict: TestVerdict::from_bool(final_ok && monotone),
        convergence_curve: curve,
        worst_point: worst.1,
        worst_time: worst.2,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovOptions {
    pub w_radius: f64,
    /// Stability radii, decreasing.
    pub v_radii: Vec<f64>,
    pub sample_count: usize,
    pub horizon: f64,
    pub tol: f64,
    /// Number of distance checkpoints along each trajectory.
    pub checkpoints: usize,
    pub bisection_steps: usize,
    pub seed: u64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            w_radius: 1.0,
            v_radii: vec![0.4, 0.2, 0.1],
            sample_count: 64,
            horizon: 20.0,
            tol: 1e-3,
            checkpoints: 40,
            bisection_steps: 8,
            seed: 0,
        }
    }
}

struct Probe {
    p: BasePoint,
    sheet: usize,
    direction: DVector<f64>,
    radius_fraction: f64,
}

/// Distance to `A` along one trajectory at the checkpoints, or the escape time.
fn trajectory_distances(
    flow: &SkewProductFlow,
    a: &FiberedSet,
    start: &FlowPoint,
    times: &[f64],
    form: TimeForm,
) -> std::result::Result<Vec<f64>, f64> {
    let mut z = start.clone();
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        z = match flow.evolve(&z, t - prev, form) {
            Ok(z) => z,
            Err(Error::Escape { t_exit }) => return Err(prev + t_exit),
            Err(_) => return Err(prev),
        };
        prev = t;
        out.push(fiber_distance(&z.x, &a.fiber_at(&z.p)));
    }
    Ok(out)
}

/// Attraction of a `w_radius` neighborhood plus Lyapunov stability searched
/// by bisection on the inner radius.
pub fn lyapunov_test(
    flow: &SkewProductFlow,
    a: &FiberedSet,
    form: TimeForm,
    opts: &LyapunovOptions,
) -> Result<AttractorReport> {
    if !(opts.w_radius > 0.0) {
        return Err(Error::Domain("W radius must be positive".into()));
    }
    if opts.sample_count == 0 || opts.checkpoints == 0 || !(opts.horizon > 0.0) {
        return Err(Error::Domain("need samples, checkpoints and a positive horizon".into()));
    }
    let d = flow.dim();
    let m = flow.base().dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let probes: Vec<Probe> = (0..opts.sample_count)
        .map(|_| {
            let p = BasePoint::new((0..m).map(|_| rng.gen_range(0.0..TWO_PI)).collect::<Vec<_>>());
            let sheet = rng.gen_range(0..a.samples_per_fiber());
            let mut dir = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
            while dir.norm() < 1e-3 {
                dir = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
            }
            let dir = dir.normalize();
            Probe {
                p,
                sheet,
                direction: dir,
                radius_fraction: rng.gen_range(0.0..1.0f64).max(1e-3),
            }
        })
        .collect();
    let times: Vec<f64> = (1..=opts.checkpoints)
        .map(|k| opts.horizon * k as f64 / opts.checkpoints as f64)
        .collect();
    let start = |pr: &Probe, radius: f64| {
        let x = &a.fiber_at(&pr.p)[pr.sheet] + &pr.direction * radius;
        FlowPoint::new(pr.p.clone(), x)
    };
    let mut notes = Vec::new();

    // attraction
    let runs: Vec<std::result::Result<Vec<f64>, f64>> = probes
        .par_iter()
        .map(|pr| trajectory_distances(flow, a, &start(pr, pr.radius_fraction * opts.w_radius), &times, form))
        .collect();
    let mut curve: Vec<(f64, f64)> = times.iter().map(|&t| (t, 0.0)).collect();
    let mut worst = (f64::NEG_INFINITY, None, None);
    let mut attraction_ok = true;
    for (pr, run) in probes.iter().zip(&runs) {
        match run {
            Ok(ds) => {
                for (c, &v) in curve.iter_mut().zip(ds) {
                    c.1 = c.1.max(v);
                }
                let last = *ds.last().expect("checkpoints > 0");
                if last > worst.0 {
                    worst = (last, Some(pr.p.clone()), Some(opts.horizon));
                }
                if last > opts.tol {
                    attraction_ok = false;
                }
            }
            Err(t) => {
                attraction_ok = false;
                notes.push(format!("escape at t = {t}"));
                worst = (f64::INFINITY, Some(pr.p.clone()), Some(*t));
            }
        }
    }
    if !attraction_ok {
        notes.push(format!(
            "attraction violated: terminal distance {:.3e} > {:.1e} at horizon {}",
            worst.0, opts.tol, opts.horizon
        ));
    }

    // stability
    let stays_within = |r1: f64, r: f64| -> bool {
        probes.par_iter().all(|pr| {
            // probe both the sampled radius and the full radius r1
            [pr.radius_fraction * r1, r1].iter().all(|&rad| {
                match trajectory_distances(flow, a, &start(pr, rad), &times, form) {
                    Ok(ds) => ds.iter().all(|&v| v <= r),
                    Err(_) => false,
                }
            })
        })
    };
    let mut stability_ok = true;
    for &r in &opts.v_radii {
        if !(r > 0.0) {
            return Err(Error::Domain("stability radii must be positive".into()));
        }
        let r1 = if stays_within(r, r) {
            r
        } else {
            let (mut lo, mut hi) = (0.0, r);
            for _ in 0..opts.bisection_steps {
                let mid = 0.5 * (lo + hi);
                if stays_within(mid, r) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        if r1 > 0.0 {
            notes.push(format!("stability: r = {r} admits r1 = {r1:.4e}"));
        } else {
            stability_ok = false;
            notes.push(format!("stability violated: no admissible r1 for r = {r}"));
        }
    }
    Ok(AttractorReport {
        verdict: TestVerdict::from_bool(attraction_ok && stability_ok),
        convergence_curve: curve,
        worst_point: worst.1,
        worst_time: worst.2,
        notes,
    })
}

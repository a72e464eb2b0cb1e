//! Pure label noise on the standard basis with a frozen balanced top layer
//! `V = (1, .., 1, -1, .., -1)` and the hinge loss at `β = 0`.
//!
//! A step on `e_i` only moves column `i` of `W`, so each column evolves on
//! its own. For column `i`, `Pos` holds the live rows (`W_ri > 0`) among the
//! first `k`, `Neg` the live rows among the last `k`, and
//! `N(e_i) = Σ_Pos W_ri - Σ_Neg W_ri`. An update moves every live weight by
//! `h` toward shrinking `|N|`, so a dead weight stays dead and both sets can
//! only shrink. Once they stop shrinking, `N` moves by exactly
//! `Δ = h (|Pos| + |Neg|)` per update.

use serde::Serialize;

use super::TheoremReport;
use crate::data::Distribution;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::loss::SurrogateLoss;
use crate::model::{ActivationKind, ArchMode, ArchSpec, Layer, ModeKind, Network};
use crate::rng::{stream_id, RngStream};
use crate::train::{draw_example, sgd_step, Budget, InitSpec, NoiseSpec, TrainConfig, TAG_INIT, TAG_SGD};

/// State of one column after an update (or at initialization).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnSnapshot {
    /// Global step count at which this state was reached; 0 for the start.
    pub step: u64,
    pub pos: Vec<u32>,
    pub neg: Vec<u32>,
    pub delta: f64,
    pub n: f64,
}

impl ColumnSnapshot {
    fn of(w: &Matrix<f64>, k: usize, col: usize, h: f64, step: u64) -> Self {
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        let mut n = 0.0;
        for r in 0..2 * k {
            let v = w.get(r, col);
            if v > 0.0 {
                if r < k {
                    pos.push(r as u32);
                    n += v;
                } else {
                    neg.push(r as u32);
                    n -= v;
                }
            }
        }
        let delta = h * (pos.len() + neg.len()) as f64;
        Self { step, pos, neg, delta, n }
    }

    pub fn is_dead(&self) -> bool {
        self.pos.is_empty() && self.neg.is_empty()
    }

    fn same_sets(&self, other: &Self) -> bool {
        self.pos == other.pos && self.neg == other.neg
    }

    /// `|N| < Δ`, or no live weight at all (then `N = Δ = 0`).
    pub fn below_delta(&self) -> bool {
        self.n.abs() < self.delta || self.is_dead()
    }
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    // Both sorted.
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

/// Per-column history: the initial state, then one entry per update.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PosNegHistory {
    pub columns: Vec<Vec<ColumnSnapshot>>,
}

impl PosNegHistory {
    /// First place where `Pos` or `Neg` grew, as `(column, update index)`.
    pub fn nesting_violation(&self) -> Option<(usize, usize)> {
        for (c, snaps) in self.columns.iter().enumerate() {
            for (j, pair) in snaps.windows(2).enumerate() {
                if !is_subset(&pair[1].pos, &pair[0].pos) || !is_subset(&pair[1].neg, &pair[0].neg) {
                    return Some((c, j + 1));
                }
            }
        }
        None
    }

    /// Index of the first snapshot carrying the column's final sets.
    pub fn stabilized_at(&self, col: usize) -> usize {
        let snaps = &self.columns[col];
        let last = snaps.last().expect("initial snapshot");
        snaps.iter().rposition(|s| !s.same_sets(last)).map_or(0, |j| j + 1)
    }

    pub fn last(&self, col: usize) -> &ColumnSnapshot {
        self.columns[col].last().expect("initial snapshot")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisRun {
    pub k: usize,
    pub d: usize,
    pub h: f64,
    pub master_seed: u64,
    pub steps: u64,
    pub updates: u64,
    /// Step at which the stopping rule first held.
    pub stopped_at: Option<u64>,
    /// Steps on `e_i` that changed some column other than `i`.
    pub cross_column_changes: u64,
    pub history: PosNegHistory,
    #[serde(skip)]
    pub initial: Matrix<f64>,
    #[serde(skip)]
    pub weights: Matrix<f64>,
}

/// Counters the stopping rules look at.
pub struct Progress<'a> {
    pub history: &'a PosNegHistory,
    /// Updates on each column since its sets last changed.
    pub since_change: &'a [u64],
    /// Updates on any column since any set last changed.
    pub global_since_change: u64,
}

impl Progress<'_> {
    /// Every column is dead or has kept its sets for `per_column` updates,
    /// and nothing changed for `global` updates overall.
    pub fn settled(&self, per_column: u64, global: u64) -> bool {
        let all_dead = (0..self.since_change.len()).all(|c| self.history.last(c).is_dead());
        all_dead
            || self.global_since_change >= global
            && self
                .since_change
                .iter()
                .enumerate()
                .all(|(c, &n)| n >= per_column || self.history.last(c).is_dead())
    }
}

fn fixed_top_net(w: Matrix<f64>, k: usize) -> Result<Network<f64>> {
    Network::new(
        vec![Layer { weight: w, bias: None }],
        ActivationKind::Relu,
        ArchMode::FixedTopLayer {
            top: Network::balanced_top(k),
        },
    )
}

/// Runs SGD from `w0` (shape `2k x d`) until `stop` holds, then for as many
/// steps again; gives up at `max_steps`.
pub fn simulate_basis(
    w0: &Matrix<f64>,
    h: f64,
    master_seed: u64,
    max_steps: u64,
    stop: impl Fn(&Progress) -> bool,
) -> Result<BasisRun> {
    let (rows, d) = w0.shape();
    if rows == 0 || rows % 2 != 0 || d == 0 {
        return Err(Error::InvalidArgument(format!("basis runs need a 2k x d matrix, got {rows} x {d}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {h}")));
    }
    let k = rows / 2;
    let mut net = fixed_top_net(w0.clone(), k)?;
    let cfg = TrainConfig {
        init: InitSpec::Given(net.clone()),
        master_seed,
        ..TrainConfig::new(
            Distribution::StandardBasis { d },
            ArchSpec {
                input_dim: d,
                hidden: vec![rows],
                output_width: 1,
                activation: ActivationKind::Relu,
                mode: ModeKind::FixedTopLayer,
            },
            SurrogateLoss::HINGE0,
            NoiseSpec::PureNoise,
            h,
            Budget::Steps(max_steps),
        )
    };
    let mut rng = RngStream::new(master_seed, stream_id(0, TAG_SGD));
    let mut history = PosNegHistory {
        columns: (0..d).map(|c| vec![ColumnSnapshot::of(w0, k, c, h, 0)]).collect(),
    };
    let mut since_change = vec![0u64; d];
    let mut global_since_change = 0u64;
    let (mut updates, mut cross) = (0u64, 0u64);
    let mut stopped_at = None;
    let mut step = 0u64;
    let initial_stop = stop(&Progress {
        history: &history,
        since_change: &since_change,
        global_since_change,
    });
    if initial_stop {
        stopped_at = Some(0);
    }
    while step < max_steps {
        if let Some(s) = stopped_at {
            if step >= 2 * s {
                break;
            }
        }
        let (x, target) = draw_example(&cfg, &mut rng)?;
        let col = x.as_slice().iter().position(|&v| v != 0.0).expect("one-hot input");
        let before = net.layers()[0].weight.clone();
        let info = sgd_step(&mut net, &x, &target, SurrogateLoss::HINGE0, h)?;
        step += 1;
        if !info.updated {
            continue;
        }
        updates += 1;
        let w = &net.layers()[0].weight;
        let moved_elsewhere = (0..d)
            .filter(|&c| c != col)
            .any(|c| (0..rows).any(|r| w.get(r, c).to_bits() != before.get(r, c).to_bits()));
        if moved_elsewhere {
            cross += 1;
        }
        let snap = ColumnSnapshot::of(w, k, col, h, step);
        let changed = !snap.same_sets(history.last(col));
        history.columns[col].push(snap);
        if changed {
            since_change[col] = 0;
            global_since_change = 0;
        } else {
            since_change[col] += 1;
            global_since_change += 1;
        }
        if stopped_at.is_none()
            && stop(&Progress {
                history: &history,
                since_change: &since_change,
                global_since_change,
            })
        {
            stopped_at = Some(step);
        }
    }
    Ok(BasisRun {
        k,
        d,
        h,
        master_seed,
        steps: step,
        updates,
        stopped_at,
        cross_column_changes: cross,
        history,
        initial: w0.clone(),
        weights: net.layers()[0].weight.clone(),
    })
}

fn uniform_matrix(rows: usize, cols: usize, half_width: f64, rng: &mut RngStream) -> Result<Matrix<f64>> {
    let data = (0..rows * cols)
        .map(|_| rng.draw_uniform(-half_width, half_width))
        .collect::<Result<Vec<_>>>()?;
    Matrix::new(rows, cols, data)
}

#[derive(Debug, Clone, Serialize)]
pub enum BasisInit {
    Uniform { half_width: f64 },
    Zero,
    /// Rows of a `2k x d` matrix.
    Given(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm3Params {
    pub k: usize,
    pub d: usize,
    pub h: f64,
    pub max_steps: u64,
    pub seed: u64,
    pub runs: usize,
    pub init: BasisInit,
}

impl Thm3Params {
    pub fn new(k: usize, d: usize, h: f64) -> Self {
        Self {
            k,
            d,
            h,
            max_steps: 2_000_000,
            seed: 1,
            runs: 5,
            init: BasisInit::Uniform { half_width: 1.0 },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Thm3RunEvidence {
    seed: u64,
    steps: u64,
    updates: u64,
    stopped_at: Option<u64>,
    cross_column_changes: u64,
    nesting_violation: Option<(usize, usize)>,
    terminal_n: Vec<f64>,
    terminal_delta: Vec<f64>,
    /// Per column, the first post-stabilization update at which `|N|`
    /// rose back to `Δ` after having been below it.
    stay_below_violations: Vec<Option<u64>>,
    history: PosNegHistory,
}

/// After stabilization, once `|N| < Δ` it must stay so. Returns the step of
/// the first violation.
fn stays_below(history: &PosNegHistory, col: usize) -> Option<u64> {
    let snaps = &history.columns[col];
    let from = history.stabilized_at(col);
    let first = snaps[from..].iter().position(ColumnSnapshot::below_delta)? + from;
    snaps[first..].iter().find(|s| !s.below_delta()).map(|s| s.step)
}

fn thm3_matrix(p: &Thm3Params, seed: u64) -> Result<Matrix<f64>> {
    let rows = 2 * p.k;
    match &p.init {
        BasisInit::Uniform { half_width } => {
            let mut rng = RngStream::new(seed, stream_id(0, TAG_INIT));
            uniform_matrix(rows, p.d, *half_width, &mut rng)
        }
        BasisInit::Zero => Ok(Matrix::zeros(rows, p.d)),
        BasisInit::Given(r) => {
            let m = Matrix::from_rows(r)?;
            if m.shape() != (rows, p.d) {
                return Err(Error::Shape {
                    op: "theorem-3 initial matrix",
                    left: format!("{rows} x {}", p.d),
                    right: format!("{} x {}", m.rows(), m.cols()),
                });
            }
            Ok(m)
        }
    }
}

/// `|N(e_i)| < 2kh` for every `i` after finitely many steps, with nested
/// `Pos`/`Neg` sets throughout.
pub fn check_theorem3(p: &Thm3Params) -> Result<TheoremReport> {
    if p.k == 0 || p.d == 0 || p.runs == 0 {
        return Err(Error::InvalidArgument(format!("bad theorem-3 parameters {p:?}")));
    }
    let mut report = TheoremReport::new("thm3", p);
    let bound = 2.0 * p.k as f64 * p.h;
    let mut runs = Vec::with_capacity(p.runs);
    for r in 0..p.runs {
        let seed = p.seed + r as u64;
        let w0 = thm3_matrix(p, seed)?;
        let d = p.d as u64;
        let run = simulate_basis(&w0, p.h, seed, p.max_steps, |pr| {
            pr.settled(4, 10 * d) && (0..pr.history.columns.len()).all(|c| pr.history.last(c).below_delta())
        })?;
        runs.push(Thm3RunEvidence {
            seed,
            steps: run.steps,
            updates: run.updates,
            stopped_at: run.stopped_at,
            cross_column_changes: run.cross_column_changes,
            nesting_violation: run.history.nesting_violation(),
            terminal_n: (0..p.d).map(|c| run.history.last(c).n).collect(),
            terminal_delta: (0..p.d).map(|c| run.history.last(c).delta).collect(),
            stay_below_violations: (0..p.d).map(|c| stays_below(&run.history, c)).collect(),
            history: run.history,
        });
    }
    let stopped = runs.iter().filter(|r| r.stopped_at.is_some()).count();
    report.check(
        "settled within budget",
        stopped == runs.len(),
        format!("{stopped}/{} runs settled within {} steps", runs.len(), p.max_steps),
    );
    let nest = runs.iter().filter(|r| r.nesting_violation.is_some()).count();
    report.check("Pos/Neg nesting", nest == 0, format!("{nest} runs with a growing set"));
    let cross: u64 = runs.iter().map(|r| r.cross_column_changes).sum();
    report.check(
        "columns evolve independently",
        cross == 0,
        format!("{cross} steps changed another column"),
    );
    let worst = runs
        .iter()
        .flat_map(|r| r.terminal_n.iter())
        .fold(0.0f64, |m, n| m.max(n.abs()));
    report.check(
        "terminal |N(e_i)| < 2kh",
        runs.iter().all(|r| r.terminal_n.iter().all(|n| n.abs() < bound)),
        format!("max |N| = {worst:.6}, 2kh = {bound:.6}"),
    );
    let stays = runs
        .iter()
        .flat_map(|r| r.stay_below_violations.iter())
        .filter(|v| v.is_some())
        .count();
    report.check(
        "|N| stays below Δ once there",
        stays == 0,
        format!("{stays} columns rose back to Δ after stabilizing"),
    );
    Ok(report.with_evidence(runs))
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm4Params {
    pub k: usize,
    pub d: usize,
    pub h: f64,
    pub seed: u64,
    pub max_steps: u64,
    /// Initializations tried before giving up on a typical one.
    pub max_attempts: usize,
}

impl Thm4Params {
    pub fn new(k: usize, d: usize, h: f64) -> Self {
        Self {
            k,
            d,
            h,
            seed: 1,
            max_steps: 1_000_000,
            max_attempts: 1000,
        }
    }
}

/// High-probability events at initialization that the small-rate branch
/// relies on, per column; returns the failing item numbers (1 to 5).
pub fn atypical_items(w: &Matrix<f64>, k: usize, col: usize) -> Vec<u8> {
    let s = ColumnSnapshot::of(w, k, col, 1.0, 0);
    let kf = k as f64;
    let k06 = kf.powf(0.6);
    let small = kf.powf(-0.4);
    let within = |n: usize| (n as f64) > kf / 2.0 - k06 && (n as f64) < kf / 2.0 + k06;
    let small_count = |rows: &[u32]| rows.iter().filter(|&&r| w.get(r as usize, col) < small).count() as f64;
    let mut bad = Vec::new();
    if !within(s.pos.len()) {
        bad.push(1);
    }
    if !within(s.neg.len()) {
        bad.push(2);
    }
    if !(s.n.abs() > 3.0 && s.n.abs() < 0.5 * k06) {
        bad.push(3);
    }
    if small_count(&s.pos) >= 2.0 * k06 {
        bad.push(4);
    }
    if small_count(&s.neg) >= 2.0 * k06 {
        bad.push(5);
    }
    bad
}

#[derive(Debug, Clone, Serialize)]
struct ColumnEvidence {
    initial_pos: usize,
    initial_neg: usize,
    initial_n: f64,
    final_pos: usize,
    final_neg: usize,
    zero_coordinates: usize,
    /// Updates on this column up to and including the one that killed it.
    updates_until_dead: Option<usize>,
    /// Post-update `N` values after the sets stabilized (last 6 at most).
    terminal_n: Vec<f64>,
    period_two: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Thm4Evidence {
    branch: &'static str,
    attempts: usize,
    master_seed: u64,
    rejected: Vec<(u64, Vec<(usize, Vec<u8>)>)>,
    steps: u64,
    updates: u64,
    stopped_at: Option<u64>,
    cross_column_changes: u64,
    nesting_violation: Option<(usize, usize)>,
    zero_bound: f64,
    columns: Vec<ColumnEvidence>,
}

/// Consecutive post-update values alternate in sign and repeat with period 2.
pub fn is_period_two(n: &[f64]) -> bool {
    n.len() >= 4
        && n.windows(2).all(|w| w[0] * w[1] < 0.0)
        && n.windows(3).all(|w| (w[2] - w[0]).abs() <= 1e-9)
}

/// Large rates (`h >= 1`) kill every hidden unit on every input; small
/// rates (`h <= 1/k`) leave each column about half alive, oscillating with
/// period 2.
pub fn check_theorem4(p: &Thm4Params) -> Result<TheoremReport> {
    if p.k == 0 || p.d == 0 || !(p.h > 0.0) || p.max_attempts == 0 {
        return Err(Error::InvalidArgument(format!("bad theorem-4 parameters {p:?}")));
    }
    let mut report = TheoremReport::new("thm4", p);
    let large = p.h >= 1.0;
    let small = p.h <= 1.0 / p.k as f64;
    if !large && !small {
        report.inconclusive(format!("no claim for 1/k < h < 1 (h = {}, k = {})", p.h, p.k));
        return Ok(report);
    }
    let rows = 2 * p.k;
    let mut rejected = Vec::new();
    let mut chosen = None;
    for attempt in 0..p.max_attempts {
        let seed = p.seed + attempt as u64;
        let mut rng = RngStream::new(seed, stream_id(0, TAG_INIT));
        let w0 = uniform_matrix(rows, p.d, 1.0, &mut rng)?;
        if large {
            chosen = Some((seed, w0));
            break;
        }
        let bad: Vec<(usize, Vec<u8>)> = (0..p.d)
            .map(|c| (c, atypical_items(&w0, p.k, c)))
            .filter(|(_, b)| !b.is_empty())
            .collect();
        if bad.is_empty() {
            chosen = Some((seed, w0));
            break;
        }
        rejected.push((seed, bad));
    }
    let Some((seed, w0)) = chosen else {
        report.inconclusive(format!("initialization atypical in all {} attempts", p.max_attempts));
        return Ok(report.with_evidence(rejected));
    };
    let d = p.d as u64;
    let run = if large {
        simulate_basis(&w0, p.h, seed, p.max_steps, |pr| {
            (0..pr.history.columns.len()).all(|c| pr.history.last(c).is_dead())
        })?
    } else {
        simulate_basis(&w0, p.h, seed, p.max_steps, |pr| pr.settled(4, 10 * d))?
    };
    let zero_bound = p.k as f64 + 6.0 * (p.k as f64).powf(0.6);
    let columns: Vec<ColumnEvidence> = (0..p.d)
        .map(|c| {
            let snaps = &run.history.columns[c];
            let (first, last) = (&snaps[0], run.history.last(c));
            let stable = &snaps[run.history.stabilized_at(c)..];
            let tail: Vec<f64> = stable.iter().skip(1).map(|s| s.n).collect();
            let tail = tail[tail.len().saturating_sub(6)..].to_vec();
            ColumnEvidence {
                initial_pos: first.pos.len(),
                initial_neg: first.neg.len(),
                initial_n: first.n,
                final_pos: last.pos.len(),
                final_neg: last.neg.len(),
                zero_coordinates: rows - last.pos.len() - last.neg.len(),
                updates_until_dead: snaps.iter().position(ColumnSnapshot::is_dead),
                period_two: is_period_two(&tail),
                terminal_n: tail,
            }
        })
        .collect();
    report.check(
        "settled within budget",
        run.stopped_at.is_some(),
        match run.stopped_at {
            Some(t) => format!("settled at step {t} of {}", p.max_steps),
            None => format!("still moving after {} steps", p.max_steps),
        },
    );
    let nesting = run.history.nesting_violation();
    report.check(
        "Pos/Neg nesting",
        nesting.is_none(),
        match nesting {
            None => "no set ever grew".to_string(),
            Some((col, step)) => format!("column {col} grew at snapshot {step}"),
        },
    );
    report.check(
        "columns evolve independently",
        run.cross_column_changes == 0,
        format!("{} steps changed another column", run.cross_column_changes),
    );
    if large {
        let dead = columns.iter().filter(|c| c.final_pos + c.final_neg == 0).count();
        report.check(
            "ReLU(W e_i) = 0 for all i",
            dead == p.d,
            format!("{dead}/{} columns dead", p.d),
        );
        let worst = columns.iter().filter_map(|c| c.updates_until_dead).max();
        report.check(
            "dead within 3 updates",
            columns.iter().all(|c| c.updates_until_dead.is_some_and(|u| u <= 3)),
            match worst {
                Some(u) if columns.iter().all(|c| c.updates_until_dead.is_some()) => {
                    format!("every column died within {u} updates")
                }
                _ => "a column never died".to_string(),
            },
        );
    } else {
        let alive = columns.iter().filter(|c| c.final_pos + c.final_neg > 0).count();
        report.check(
            "ReLU(W e_i) != 0 for all i",
            alive == p.d,
            format!("{alive}/{} columns alive", p.d),
        );
        let worst = columns.iter().map(|c| c.zero_coordinates).max().unwrap_or(0);
        report.check(
            "zero coordinates <= k + 6k^0.6",
            (worst as f64) <= zero_bound,
            format!("max {worst} zero coordinates, bound {zero_bound:.1}"),
        );
        report.check(
            "zero coordinates <= 620",
            worst <= 620,
            format!("max {worst} against the quoted 620"),
        );
        let periodic = columns.iter().filter(|c| c.period_two).count();
        report.check(
            "period-2 oscillation",
            periodic == p.d,
            format!("{periodic}/{} columns alternate with period 2", p.d),
        );
    }
    let ev = Thm4Evidence {
        branch: if large { "large_rate" } else { "small_rate" },
        attempts: rejected.len() + 1,
        master_seed: seed,
        rejected,
        steps: run.steps,
        updates: run.updates,
        stopped_at: run.stopped_at,
        cross_column_changes: run.cross_column_changes,
        nesting_violation: nesting,
        zero_bound,
        columns,
    };
    Ok(report.with_evidence(ev))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_on_sorted_indices() {
        assert!(is_subset(&[1, 3], &[0, 1, 2, 3]));
        assert!(is_subset(&[], &[0]));
        assert!(!is_subset(&[4], &[0, 1, 2, 3]));
        assert!(!is_subset(&[0, 2], &[2]));
    }

    #[test]
    fn theorem3_default_suite() {
        let r = check_theorem3(&Thm3Params::new(20, 10, 0.01)).unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn theorem3_hand_traced_neuron() {
        // One live positive weight 0.5 and one dead negative weight: N moves
        // 0.5, 0.4, .., 0.1 on each `y = -1` update and then hovers in
        // `(-h, h)`.
        let mut p = Thm3Params::new(1, 1, 0.1);
        p.runs = 1;
        p.init = BasisInit::Given(vec![vec![0.5], vec![-0.3]]);
        let r = check_theorem3(&p).unwrap();
        assert!(r.passed(), "{r}");
        let hist = &r.evidence[0]["history"]["columns"][0];
        let ns: Vec<f64> = hist.as_array().unwrap().iter().map(|s| s["n"].as_f64().unwrap()).collect();
        for (j, want) in [0.5, 0.4, 0.3, 0.2, 0.1].iter().enumerate() {
            assert!((ns[j] - want).abs() < 1e-12, "{ns:?}");
        }
        assert!(ns[5].abs() < 0.1, "{ns:?}");
        assert!(ns[5..].iter().all(|n| n.abs() < 0.2));
        assert!(hist.as_array().unwrap().iter().all(|s| s["neg"].as_array().unwrap().is_empty()));
    }

    #[test]
    fn theorem3_zero_init_is_immediately_done() {
        let mut p = Thm3Params::new(3, 2, 0.1);
        p.runs = 1;
        p.init = BasisInit::Zero;
        let r = check_theorem3(&p).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.evidence[0]["updates"], 0);
    }

    #[test]
    fn theorem4_large_rate() {
        let r = check_theorem4(&Thm4Params::new(500, 5, 1.0)).unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn theorem4_small_rate() {
        let r = check_theorem4(&Thm4Params::new(500, 5, 1.0 / 500.0)).unwrap();
        assert!(r.passed(), "{r}");
        for c in r.evidence["columns"].as_array().unwrap() {
            let z = c["zero_coordinates"].as_u64().unwrap();
            assert!((430..=570).contains(&z), "{c}");
        }
    }

    #[test]
    fn theorem4_tiny_large_rate_trace() {
        // k = 2, one column: Pos weights 0.9, 0.2; Neg weights 0.7, 0.1.
        // N = 0.3 > 0, so the first update (y = -1) kills Pos and lifts Neg
        // to 1.7, 1.1; two `y = +1` updates then kill Neg.
        let w0 = Matrix::from_rows(&[vec![0.9], vec![0.2], vec![0.7], vec![0.1]]).unwrap();
        let run = simulate_basis(&w0, 1.0, 3, 10_000, |pr| pr.history.last(0).is_dead()).unwrap();
        let s = &run.history.columns[0];
        assert_eq!(s.len(), 4, "{s:?}");
        assert!(s[1].pos.is_empty() && s[1].neg == vec![2, 3]);
        assert!((s[1].n + 2.8).abs() < 1e-12);
        assert_eq!(s[2].neg, vec![2, 3]);
        assert!((s[2].n + 0.8).abs() < 1e-12);
        assert!(s[3].is_dead());
    }

    #[test]
    fn theorem4_middle_rates_are_inconclusive() {
        let r = check_theorem4(&Thm4Params::new(10, 2, 0.5)).unwrap();
        assert_eq!(r.verdict, super::super::Verdict::Inconclusive);
    }

    #[test]
    fn atypical_initializations_are_detected() {
        let k = 500;
        let mut w = Matrix::zeros(2 * k, 1);
        assert!(atypical_items(&w, k, 0).contains(&1));
        for r in 0..2 * k {
            w.set(r, 0, if r % 2 == 0 { 0.5 } else { -0.5 });
        }
        // Balanced halves, N = 0: only item 3 fails.
        assert_eq!(atypical_items(&w, k, 0), vec![3]);
    }

    #[test]
    fn period_two_detection() {
        assert!(is_period_two(&[0.3, -0.7, 0.3, -0.7]));
        assert!(!is_period_two(&[0.3, -0.7, 0.2, -0.8]));
        assert!(!is_period_two(&[0.3, 0.7, 0.3, 0.7]));
        assert!(!is_period_two(&[0.3, -0.7, 0.3]));
    }
}

//! Dense linear programs `min cᵀv  s.t.  A v ≤ b,  lo ≤ v ≤ hi`.
//!
//! [`solve`] runs a two-phase bounded-variable primal simplex on a dense
//! tableau. Pricing is Dantzig's rule; after a run of degenerate pivots it
//! switches to Bland's rule until the objective moves again, which rules out
//! cycling. Every optimal answer carries row duals, and [`check_solution`]
//! recomputes primal residuals and a Lagrangian lower bound from the problem
//! data alone.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// Sparse `(variable, coefficient)` pairs; the semantics are dense.
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

impl LinearProgram {
    /// `n_vars` variables with zero cost and bounds `[0, ∞)`.
    pub fn new(n_vars: usize) -> Self {
        Self {
            objective: vec![0.0; n_vars],
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn set_cost(&mut self, var: usize, c: f64) {
        self.objective[var] = c;
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.lower[var] = lo;
        self.upper[var] = hi;
    }

    /// Adds `Σ coeffs · v ≤ rhs`; zero coefficients are dropped.
    pub fn add_row(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> usize {
        let coeffs = coeffs.into_iter().filter(|(_, a)| *a != 0.0).collect();
        self.rows.push(Row { coeffs, rhs });
        self.rows.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if !self.objective[j].is_finite() {
                return Err(Error::InvalidLp(format!("cost of variable {j} is not finite")));
            }
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidLp(format!("variable {j} has bounds [{lo}, {hi}]")));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::InvalidLp(format!("row {r} has non-finite rhs")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(Error::InvalidLp(format!("row {r} has bad entry ({j}, {a})")));
                }
            }
        }
        Ok(())
    }

    pub fn activity(&self, row: usize, v: &[f64]) -> f64 {
        self.rows[row].coeffs.iter().map(|&(j, a)| a * v[j]).sum()
    }

    pub fn objective_value(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum()
    }

    /// Writes the plain-text dump format:
    ///
    /// ```text
    /// lp <n_vars> <n_rows>
    /// objective
    /// <var> <cost>          (non-zero costs only)
    /// row <index> <rhs>     (one block per `≤` row)
    /// <var> <coef>
    /// bounds
    /// <var> <lo> <hi>       (every variable; ±inf allowed)
    /// end
    /// ```
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lp {} {}", self.n_vars(), self.n_rows())?;
        writeln!(w, "objective")?;
        for (j, c) in self.objective.iter().enumerate().filter(|(_, c)| **c != 0.0) {
            writeln!(w, "{j} {c:?}")?;
        }
        for (r, row) in self.rows.iter().enumerate() {
            writeln!(w, "row {r} {:?}", row.rhs)?;
            for (j, a) in &row.coeffs {
                writeln!(w, "{j} {a:?}")?;
            }
        }
        writeln!(w, "bounds")?;
        for j in 0..self.n_vars() {
            writeln!(w, "{j} {:?} {:?}", self.lower[j], self.upper[j])?;
        }
        writeln!(w, "end")
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::InvalidLp(format!("dump line {}: {msg}", line + 1));
        let num = |s: &str, line: usize| -> Result<f64> {
            match s {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => s.parse().map_err(|_| bad(line, "bad number")),
            }
        };
        let idx = |s: &str, line: usize| -> Result<usize> { s.parse().map_err(|_| bad(line, "bad index")) };

        enum Section {
            Header,
            Objective,
            Row,
            Bounds,
            Done,
        }
        let mut lp = LinearProgram::new(0);
        let mut expected_rows = 0;
        let mut section = Section::Header;
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.is_empty() {
                continue;
            }
            match (&section, tok.as_slice()) {
                (Section::Header, ["lp", n, m]) => {
                    lp = LinearProgram::new(idx(n, ln)?);
                    expected_rows = idx(m, ln)?;
                }
                (Section::Header, ["objective"]) => section = Section::Objective,
                (_, ["row", _, rhs]) => {
                    lp.rows.push(Row { coeffs: Vec::new(), rhs: num(rhs, ln)? });
                    section = Section::Row;
                }
                (_, ["bounds"]) => section = Section::Bounds,
                (_, ["end"]) => section = Section::Done,
                (Section::Objective, [j, c]) => {
                    let j = idx(j, ln)?;
                    *lp.objective.get_mut(j).ok_or_else(|| bad(ln, "index out of range"))? = num(c, ln)?;
                }
                (Section::Row, [j, a]) => {
                    let entry = (idx(j, ln)?, num(a, ln)?);
                    lp.rows.last_mut().expect("inside row block").coeffs.push(entry);
                }
                (Section::Bounds, [j, lo, hi]) => {
                    let j = idx(j, ln)?;
                    if j >= lp.n_vars() {
                        return Err(bad(ln, "index out of range"));
                    }
                    lp.set_bounds(j, num(lo, ln)?, num(hi, ln)?);
                }
                _ => return Err(bad(ln, "unexpected line")),
            }
        }
        if !matches!(section, Section::Done) || lp.rows.len() != expected_rows {
            return Err(Error::InvalidLp("truncated dump".into()));
        }
        lp.validate()?;
        Ok(lp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The simplex terminated but its answer failed certification.
    NumericalFailure,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    /// Primal objective minus the Lagrangian bound from `row_duals`.
    pub duality_gap_bound: f64,
    /// Non-negative multipliers of the `≤` rows.
    pub row_duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Allowed violation of a row, normalized by `max(1, ‖a_r‖∞)`.
    pub tol_feas: f64,
    /// Allowed gap, scaled by `1 + |objective|`.
    pub tol_gap: f64,
    pub max_iterations: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol_feas: 1e-9, tol_gap: 1e-7, max_iterations: None }
    }
}

const PIVOT_TOL: f64 = 1e-9;
const PRICE_TOL: f64 = 1e-10;
const DEGENERATE_STREAK: usize = 50;

/// How an original variable is expressed with non-negative internal columns.
#[derive(Debug, Clone, Copy)]
enum Map {
    /// v = offset + w, w ∈ [0, hi − lo]
    Shift { col: usize, offset: f64 },
    /// v = offset − w, w ∈ [0, ∞)
    Mirror { col: usize, offset: f64 },
    /// v = w⁺ − w⁻
    Free { pos: usize, neg: usize },
}

struct Tableau {
    m: usize,
    width: usize, // columns + rhs
    cells: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    upper: Vec<f64>,
    flipped: Vec<bool>,
    cost: Vec<f64>,
    excluded: Vec<bool>,
    iterations: usize,
    max_iterations: usize,
}

enum Phase {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn ncols(&self) -> usize {
        self.width - 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.cells[i * self.width + self.width - 1]
    }

    fn effective_cost(&self, j: usize) -> f64 {
        if self.flipped[j] {
            -self.cost[j]
        } else {
            self.cost[j]
        }
    }

    fn price_out(&mut self) {
        let n = self.ncols();
        for j in 0..n {
            self.d[j] = self.effective_cost(j);
        }
        for i in 0..self.m {
            let cb = self.effective_cost(self.basis[i]);
            if cb == 0.0 {
                continue;
            }
            let row = &self.cells[i * self.width..i * self.width + n];
            for (dj, a) in self.d.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
    }

    /// Substitutes `w = u − w'` for column `j`.
    fn flip_nonbasic(&mut self, j: usize) {
        let u = self.upper[j];
        let w = self.width;
        for i in 0..self.m {
            let a = self.cells[i * w + j];
            if a != 0.0 {
                self.cells[i * w + w - 1] -= a * u;
                self.cells[i * w + j] = -a;
            }
        }
        self.d[j] = -self.d[j];
        self.flipped[j] = !self.flipped[j];
    }

    fn flip_basic(&mut self, r: usize) {
        let b = self.basis[r];
        let u = self.upper[b];
        let w = self.width;
        let row = &mut self.cells[r * w..(r + 1) * w];
        for (k, a) in row.iter_mut().enumerate().take(w - 1) {
            if k != b {
                *a = -*a;
            }
        }
        row[w - 1] = u - row[w - 1];
        self.flipped[b] = !self.flipped[b];
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width;
        let p = self.cells[r * w + j];
        {
            let row = &mut self.cells[r * w..(r + 1) * w];
            for a in row.iter_mut() {
                *a /= p;
            }
            row[j] = 1.0;
        }
        let pivot_row: Vec<f64> = self.cells[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.cells[i * w + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.cells[i * w..(i + 1) * w];
            for (a, pr) in row.iter_mut().zip(&pivot_row) {
                *a -= f * pr;
            }
            row[j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for (dk, pr) in self.d.iter_mut().zip(&pivot_row) {
                *dk -= f * pr;
            }
            self.d[j] = 0.0;
        }
        self.basis[r] = j;
    }

    fn run(&mut self) -> Phase {
        let n = self.ncols();
        let mut is_basic = vec![false; n];
        for &b in &self.basis {
            is_basic[b] = true;
        }
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Phase::IterationLimit;
            }
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut entering = None;
            let mut best = -PRICE_TOL;
            for j in 0..n {
                if is_basic[j] || self.excluded[j] {
                    continue;
                }
                let dj = self.d[j];
                if dj < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = dj;
                }
            }
            let Some(j) = entering else {
                return Phase::Optimal;
            };
            self.iterations += 1;

            let mut t_best = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut best_pivot = 0.0f64;
            for i in 0..self.m {
                let a = self.at(i, j);
                let b = self.basis[i];
                let t = if a > PIVOT_TOL {
                    self.rhs(i).max(0.0) / a
                } else if a < -PIVOT_TOL && self.upper[b].is_finite() {
                    (self.upper[b] - self.rhs(i)).max(0.0) / -a
                } else {
                    continue;
                };
                let better = match leave {
                    None => t <= t_best,
                    Some((l, _)) => {
                        if t < t_best - 1e-12 {
                            true
                        } else if t <= t_best + 1e-12 {
                            if bland {
                                b < self.basis[l]
                            } else {
                                a.abs() > best_pivot
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    t_best = t.min(t_best);
                    leave = Some((i, a < 0.0));
                    best_pivot = a.abs();
                }
            }
            match leave {
                None if t_best.is_infinite() => return Phase::Unbounded,
                None => {
                    self.flip_nonbasic(j);
                    degenerate = 0;
                }
                Some((r, at_upper)) => {
                    if at_upper {
                        self.flip_basic(r);
                    }
                    is_basic[self.basis[r]] = false;
                    self.pivot(r, j);
                    is_basic[j] = true;
                    if t_best > 1e-12 {
                        degenerate = 0;
                    } else {
                        degenerate += 1;
                    }
                }
            }
        }
    }

    fn column_value(&self, j: usize, basic_row: &[Option<usize>]) -> f64 {
        let raw = basic_row[j].map_or(0.0, |i| self.rhs(i));
        if self.flipped[j] {
            self.upper[j] - raw
        } else {
            raw
        }
    }
}

/// Solves `lp`; never returns `Optimal` without a certificate within the tolerances.
pub fn solve(lp: &LinearProgram, opts: &SolveOptions) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.n_vars();
    let m = lp.n_rows();

    let mut maps = Vec::with_capacity(n);
    let mut col_upper = Vec::new();
    let mut col_cost = Vec::new();
    for j in 0..n {
        let (lo, hi, c) = (lp.lower[j], lp.upper[j], lp.objective[j]);
        let map = if lo.is_finite() {
            col_upper.push(hi - lo);
            col_cost.push(c);
            Map::Shift { col: col_upper.len() - 1, offset: lo }
        } else if hi.is_finite() {
            col_upper.push(f64::INFINITY);
            col_cost.push(-c);
            Map::Mirror { col: col_upper.len() - 1, offset: hi }
        } else {
            col_upper.extend([f64::INFINITY; 2]);
            col_cost.extend([c, -c]);
            Map::Free { pos: col_upper.len() - 2, neg: col_upper.len() - 1 }
        };
        maps.push(map);
    }
    let nc = col_upper.len();

    // Internal rows: Σ a' w + s_r = b'_r, negated where b'_r < 0 and given an artificial.
    let mut dense_rows = Vec::with_capacity(m);
    let mut negate = Vec::with_capacity(m);
    for row in &lp.rows {
        let mut coeffs = vec![0.0; nc];
        let mut rhs = row.rhs;
        for &(j, a) in &row.coeffs {
            match maps[j] {
                Map::Shift { col, offset } => {
                    coeffs[col] += a;
                    rhs -= a * offset;
                }
                Map::Mirror { col, offset } => {
                    coeffs[col] -= a;
                    rhs -= a * offset;
                }
                Map::Free { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        negate.push(rhs < 0.0);
        dense_rows.push((coeffs, rhs));
    }
    let na = negate.iter().filter(|&&x| x).count();
    let total = nc + m + na;
    let width = total + 1;
    let mut cells = vec![0.0; m * width];
    let mut basis = Vec::with_capacity(m);
    let mut art = nc + m;
    for (i, ((coeffs, rhs), &neg)) in dense_rows.into_iter().zip(&negate).enumerate() {
        let sign = if neg { -1.0 } else { 1.0 };
        let row = &mut cells[i * width..(i + 1) * width];
        for (k, a) in coeffs.into_iter().enumerate() {
            row[k] = sign * a;
        }
        row[nc + i] = sign;
        row[total] = sign * rhs;
        if neg {
            row[art] = 1.0;
            basis.push(art);
            art += 1;
        } else {
            basis.push(nc + i);
        }
    }

    let mut upper = col_upper;
    upper.extend(std::iter::repeat_n(f64::INFINITY, m + na));
    let mut excluded = vec![false; total];
    let max_iterations = opts.max_iterations.unwrap_or(200 * (m + nc) + 1000);
    let mut tab = Tableau {
        m,
        width,
        cells,
        d: vec![0.0; total],
        basis,
        upper,
        flipped: vec![false; total],
        cost: vec![0.0; total],
        excluded: excluded.clone(),
        iterations: 0,
        max_iterations,
    };

    let failed = |status, iterations| LpSolution {
        values: vec![f64::NAN; n],
        objective: f64::NAN,
        status,
        duality_gap_bound: f64::INFINITY,
        row_duals: vec![0.0; m],
        iterations,
    };

    if na > 0 {
        for k in nc + m..total {
            tab.cost[k] = 1.0;
        }
        tab.price_out();
        match tab.run() {
            Phase::Optimal => {}
            Phase::Unbounded => return Ok(failed(LpStatus::NumericalFailure, tab.iterations)),
            Phase::IterationLimit => return Ok(failed(LpStatus::IterationLimit, tab.iterations)),
        }
        let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        let infeasibility: f64 = (0..m).filter(|&i| tab.basis[i] >= nc + m).map(|i| tab.rhs(i)).sum();
        if infeasibility > opts.tol_feas * scale {
            return Ok(failed(LpStatus::Infeasible, tab.iterations));
        }
        // Drive zero-level artificials out of the basis where a structural pivot exists.
        for r in 0..m {
            if tab.basis[r] < nc + m {
                continue;
            }
            let in_basis: Vec<bool> = {
                let mut v = vec![false; total];
                for &b in &tab.basis {
                    v[b] = true;
                }
                v
            };
            if let Some(k) = (0..nc + m)
                .filter(|&k| !in_basis[k])
                .max_by(|&a, &b| tab.at(r, a).abs().total_cmp(&tab.at(r, b).abs()))
                .filter(|&k| tab.at(r, k).abs() > PIVOT_TOL)
            {
                tab.pivot(r, k);
            }
        }
        for item in excluded.iter_mut().skip(nc + m) {
            *item = true;
        }
        tab.excluded = excluded;
        tab.cost.iter_mut().for_each(|c| *c = 0.0);
    }

    tab.cost[..nc].copy_from_slice(&col_cost);
    tab.price_out();
    match tab.run() {
        Phase::Optimal => {}
        Phase::Unbounded => return Ok(failed(LpStatus::Unbounded, tab.iterations)),
        Phase::IterationLimit => return Ok(failed(LpStatus::IterationLimit, tab.iterations)),
    }

    let mut basic_row = vec![None; total];
    for (i, &b) in tab.basis.iter().enumerate() {
        basic_row[b] = Some(i);
    }
    let values: Vec<f64> = maps
        .iter()
        .enumerate()
        .map(|(j, map)| {
            let v = match *map {
                Map::Shift { col, offset } => offset + tab.column_value(col, &basic_row),
                Map::Mirror { col, offset } => offset - tab.column_value(col, &basic_row),
                Map::Free { pos, neg } => tab.column_value(pos, &basic_row) - tab.column_value(neg, &basic_row),
            };
            v.clamp(lp.lower[j], lp.upper[j])
        })
        .collect();
    // Reduced cost of slack r is the multiplier of row r, whatever the row's internal sign.
    let row_duals: Vec<f64> = (0..m).map(|r| tab.d[nc + r].max(0.0)).collect();

    let mut sol = LpSolution {
        objective: lp.objective_value(&values),
        values,
        status: LpStatus::Optimal,
        duality_gap_bound: f64::INFINITY,
        row_duals,
        iterations: tab.iterations,
    };
    let report = check_solution(lp, &sol, opts);
    sol.duality_gap_bound = report.gap;
    if !report.is_clean() {
        log::warn!("simplex answer failed certification: {:?}", report.violations);
        sol.status = LpStatus::NumericalFailure;
    }
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Row { row: usize, excess: f64 },
    Bound { var: usize, excess: f64 },
    DualSign { row: usize, value: f64 },
    Gap { gap: f64, allowed: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub violations: Vec<Violation>,
    /// Largest normalized row violation.
    pub max_row_violation: f64,
    /// Lagrangian lower bound on the optimum implied by the row duals.
    pub dual_bound: f64,
    pub gap: f64,
}

impl CheckReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Recomputes feasibility and the duality gap of `sol` from the data of `lp`.
///
/// The bound is `L(y) = −bᵀy + Σ_j min_{lo_j ≤ v ≤ hi_j} (c + Aᵀy)_j v`. A
/// column whose reduced cost is within round-off of zero but has an infinite
/// bound on the unfavourable side is evaluated at the primal value instead.
pub fn check_solution(lp: &LinearProgram, sol: &LpSolution, opts: &SolveOptions) -> CheckReport {
    let mut violations = Vec::new();
    let v = &sol.values;
    let mut max_row = 0.0f64;
    for (r, row) in lp.rows.iter().enumerate() {
        let norm = row.coeffs.iter().fold(1.0f64, |m, (_, a)| m.max(a.abs()));
        let excess = (lp.activity(r, v) - row.rhs) / norm;
        max_row = max_row.max(excess);
        if excess > opts.tol_feas || excess.is_nan() {
            violations.push(Violation::Row { row: r, excess });
        }
    }
    for j in 0..lp.n_vars() {
        let excess = (lp.lower[j] - v[j]).max(v[j] - lp.upper[j]);
        if excess > opts.tol_feas || v[j].is_nan() {
            violations.push(Violation::Bound { var: j, excess });
        }
    }

    let y = &sol.row_duals;
    let mut reduced = lp.objective.clone();
    let mut bound = 0.0;
    for (r, row) in lp.rows.iter().enumerate() {
        let yr = y.get(r).copied().unwrap_or(0.0);
        if yr < -opts.tol_feas {
            violations.push(Violation::DualSign { row: r, value: yr });
        }
        let yr = yr.max(0.0);
        if yr == 0.0 {
            continue;
        }
        bound -= yr * row.rhs;
        for &(j, a) in &row.coeffs {
            reduced[j] += yr * a;
        }
    }
    for j in 0..lp.n_vars() {
        let dj = reduced[j];
        let tiny = dj.abs() <= 1e-9 * (1.0 + lp.objective[j].abs());
        let at = if dj > 0.0 { lp.lower[j] } else { lp.upper[j] };
        bound += if at.is_finite() {
            dj * at
        } else if tiny || dj == 0.0 {
            dj * v[j]
        } else {
            f64::NEG_INFINITY
        };
    }
    let primal = lp.objective_value(v);
    let gap = primal - bound;
    let allowed = opts.tol_gap * (1.0 + primal.abs());
    if !(gap <= allowed) {
        violations.push(Violation::Gap { gap, allowed });
    }
    CheckReport { violations, max_row_violation: max_row, dual_bound: bound, gap }
}

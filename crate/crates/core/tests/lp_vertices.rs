//! Dense simplex against brute-force vertex enumeration on small boxed LPs.

use prosumer_storage::lp::{check_solution, solve, LinearProgram, LpStatus, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 5;
const M: usize = 3;

/// Each constraint as `a·x ≤ b`, bounds included.
fn all_constraints(lp: &LinearProgram) -> Vec<(Vec<f64>, f64)> {
    let mut out = Vec::new();
    for r in lp.rows() {
        let mut a = vec![0.0; N];
        for &(j, v) in &r.coeffs {
            a[j] += v;
        }
        out.push((a, r.rhs));
    }
    for j in 0..N {
        let mut a = vec![0.0; N];
        a[j] = 1.0;
        out.push((a.clone(), lp.upper()[j]));
        a[j] = -1.0;
        out.push((a, -lp.lower()[j]));
    }
    out
}

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combos(k: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, k: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, k, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, k, n, &mut Vec::new(), &mut out);
    out
}

/// Best objective over all vertices, or `None` when no vertex is feasible.
fn best_vertex(lp: &LinearProgram) -> Option<f64> {
    let cons = all_constraints(lp);
    let mut best: Option<f64> = None;
    for set in combos(N, cons.len()) {
        let a = set.iter().map(|&i| cons[i].0.clone()).collect();
        let b = set.iter().map(|&i| cons[i].1).collect();
        let Some(x) = gauss(a, b) else { continue };
        let feasible = cons.iter().all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-9);
        if feasible {
            let v = lp.objective_value(&x);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

fn random_lp(rng: &mut ChaCha8Rng, allow_negative_rhs: bool) -> LinearProgram {
    let mut lp = LinearProgram::new(N);
    for j in 0..N {
        let lo = rng.gen_range(-2.0..1.0f64).round();
        let hi = lo + rng.gen_range(1.0..4.0f64).round();
        lp.set_bounds(j, lo, hi);
        lp.set_cost(j, rng.gen_range(-3.0..3.0));
    }
    for _ in 0..M {
        let coeffs: Vec<(usize, f64)> = (0..N).map(|j| (j, rng.gen_range(-2.0..2.0))).collect();
        let rhs = if allow_negative_rhs { rng.gen_range(-4.0..4.0) } else { rng.gen_range(0.5..6.0) };
        lp.add_row(coeffs, rhs);
    }
    lp
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let opts = SolveOptions::default();
    let (mut optimal, mut infeasible) = (0, 0);
    for k in 0..150 {
        let lp = random_lp(&mut rng, k % 3 == 0);
        let sol = solve(&lp, &opts).unwrap();
        match best_vertex(&lp) {
            Some(v) => {
                assert_eq!(sol.status, LpStatus::Optimal, "instance {k}");
                assert!((sol.objective - v).abs() <= 1e-7 * (1.0 + v.abs()), "instance {k}: {} vs {v}", sol.objective);
                assert!(check_solution(&lp, &sol, &opts).is_clean(), "instance {k}");
                optimal += 1;
            }
            None => {
                assert_eq!(sol.status, LpStatus::Infeasible, "instance {k}");
                infeasible += 1;
            }
        }
    }
    assert!(optimal >= 100, "{optimal} optimal, {infeasible} infeasible");
}

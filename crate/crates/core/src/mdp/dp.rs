//! Exact backward induction on a certified spec.

use super::spec::LinearMdpSpec;

/// A deterministic Markov policy: `actions[h][s]` for zero-based stage `h`.
pub type Policy = Vec<Vec<usize>>;

/// `v[h][s]` for `h in 0..=H` (with `v[H] = 0`) and `q[h][s][a]` for `h in 0..H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub v: Vec<Vec<f64>>,
    pub q: Vec<Vec<Vec<f64>>>,
}

impl ValueTables {
    /// Value at the first stage.
    pub fn initial_value(&self, s: usize) -> f64 {
        self.v[0][s]
    }
}

fn backup(spec: &LinearMdpSpec, h: usize, s: usize, a: usize, next: &[f64]) -> f64 {
    let row = spec.transition_row(h, s, a);
    spec.reward(h, s, a) + row.iter().zip(next).map(|(p, v)| p * v).sum::<f64>()
}

/// `Q*_h = r_h + P_h V*_{h+1}`, `V*_h = max_a Q*_h`.
pub fn exact_optimal_values(spec: &LinearMdpSpec) -> ValueTables {
    let (ns, na, horizon) = (spec.num_states(), spec.num_actions(), spec.horizon());
    let mut v = vec![vec![0.0; ns]; horizon + 1];
    let mut q = vec![vec![vec![0.0; na]; ns]; horizon];
    for h in (0..horizon).rev() {
        for s in 0..ns {
            for a in 0..na {
                q[h][s][a] = backup(spec, h, s, a, &v[h + 1]);
            }
            v[h][s] = q[h][s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
    }
    ValueTables { v, q }
}

/// `Q^pi_h = r_h + P_h V^pi_{h+1}`, `V^pi_h(s) = Q^pi_h(s, pi_h(s))`.
pub fn evaluate_policy(spec: &LinearMdpSpec, policy: &Policy) -> ValueTables {
    let (ns, na, horizon) = (spec.num_states(), spec.num_actions(), spec.horizon());
    let mut v = vec![vec![0.0; ns]; horizon + 1];
    let mut q = vec![vec![vec![0.0; na]; ns]; horizon];
    for h in (0..horizon).rev() {
        for s in 0..ns {
            for a in 0..na {
                q[h][s][a] = backup(spec, h, s, a, &v[h + 1]);
            }
            v[h][s] = q[h][s][policy[h][s]];
        }
    }
    ValueTables { v, q }
}

/// Greedy policy with respect to `tables.q`; lowest action index on ties.
pub fn greedy_policy(tables: &ValueTables) -> Policy {
    tables
        .q
        .iter()
        .map(|stage| {
            stage
                .iter()
                .map(|row| {
                    let mut best = 0;
                    for (a, &val) in row.iter().enumerate() {
                        if val > row[best] {
                            best = a;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect()
}

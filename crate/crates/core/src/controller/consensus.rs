use crate::error::{Error, Result};

/// Result of a synchronous max-consensus run.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxConsensus {
    /// Value held by every bus at termination.
    pub values: Vec<f64>,
    /// Rounds in which at least one bus changed its value.
    pub rounds: usize,
}

/// Synchronous max-consensus `x_i <- max(x_i, max_j x_j)` over the given
/// undirected `neighbours` lists, run separately inside each group of
/// `groups` (buses only listen to peers with the same group id).
///
/// Stops at the first round without change. If some group has not agreed by
/// then (its subgraph is disconnected) or the round cap `n` is hit, the run
/// is reported as not converged.
pub fn max_consensus(values: &[f64], neighbours: &[Vec<usize>], groups: &[usize]) -> Result<MaxConsensus> {
    let n = values.len();
    crate::plant::check_len("neighbour lists", n, neighbours.len())?;
    crate::plant::check_len("group ids", n, groups.len())?;
    let mut x = values.to_vec();
    let mut next = x.clone();
    let mut rounds = 0;
    loop {
        let mut changed = false;
        for i in 0..n {
            let mut best = x[i];
            for &j in &neighbours[i] {
                if groups[j] == groups[i] && x[j] > best {
                    best = x[j];
                }
            }
            changed |= best != x[i];
            next[i] = best;
        }
        std::mem::swap(&mut x, &mut next);
        if !changed {
            break;
        }
        rounds += 1;
        if rounds > n {
            return Err(Error::NotConverged {
                what: "max-consensus",
                iterations: rounds,
                residual: f64::NAN,
            });
        }
    }
    let n_groups = groups.iter().copied().max().map_or(0, |g| g + 1);
    for g in 0..n_groups {
        let mut members = (0..n).filter(|&i| groups[i] == g);
        if let Some(first) = members.next() {
            let spread = members.map(|i| (x[i] - x[first]).abs()).fold(0.0, f64::max);
            if spread > 0.0 {
                return Err(Error::NotConverged {
                    what: "max-consensus",
                    iterations: rounds,
                    residual: spread,
                });
            }
        }
    }
    Ok(MaxConsensus { values: x, rounds })
}

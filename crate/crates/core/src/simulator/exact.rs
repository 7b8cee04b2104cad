//! Exact small-chain oracle.
//!
//! For configurations whose replenishment and arrivals take finitely many
//! integer values and whose dynamics stay on an integer lattice, the node
//! is a finite Markov chain. This module builds that chain by driving the
//! same [`step`] function the simulator uses, solves for the stationary
//! distribution by power iteration, and returns exact long-run metrics
//! (zero confidence width). It is the ground truth the simulator is
//! checked against.

use thiserror::Error;

use super::{step, Estimate, Metrics, Mode, NodeState, SimConfig};
use crate::scalar::{real, Scalar};

/// Largest battery capacity (in integer units) the oracle accepts.
pub const MAX_BATTERY_STATES: u64 = 200;
/// Largest buffer capacity (in integer units) the oracle accepts.
pub const MAX_BUFFER_STATES: u64 = 100;

const INTEGER_TOL: f64 = 1e-9;
const STATIONARY_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("exact analysis needs finite-support (discrete or constant) {0} with integer values")]
    NonFiniteSupport(&'static str),
    #[error("configuration leaves the integer lattice: {0}")]
    NonInteger(String),
    #[error("state space too large: {0} (caps: battery {MAX_BATTERY_STATES}, buffer {MAX_BUFFER_STATES} integer units)")]
    Resource(String),
    #[error("chain decomposition failed: {0}")]
    Decomposition(String),
    #[error("power iteration did not reach residual {STATIONARY_RESIDUAL:e} in {0} iterations")]
    NoConvergence(usize),
    #[error(transparent)]
    Sim(#[from] super::SimError),
}

fn as_integer(x: f64, what: &str) -> Result<u64, OracleError> {
    let r = x.round();
    if (x - r).abs() > INTEGER_TOL || r < 0.0 {
        return Err(OracleError::NonInteger(format!("{what} = {x} is not a nonnegative integer")));
    }
    Ok(r as u64)
}

struct Lattice {
    battery_states: u64,
    queue_states: u64,
}

impl Lattice {
    fn index(&self, b: u64, q: u64) -> usize {
        (b * self.queue_states + q) as usize
    }
    fn len(&self) -> usize {
        (self.battery_states * self.queue_states) as usize
    }
}

/// Exact long-run metrics from the stationary distribution of the slot
/// chain. Requirements: finite-support integer-valued sources, integer
/// battery/buffer capacities and initial state, a deterministic policy
/// whose clamped draws keep the state on the integer lattice, and state
/// spaces within [`MAX_BATTERY_STATES`] x [`MAX_BUFFER_STATES`].
pub fn exact_chain_analysis<S: Scalar>(cfg: &SimConfig<S>) -> Result<Metrics<S>, OracleError> {
    cfg.validate()?;

    let m = as_integer(cfg.battery_capacity.to_f64().unwrap(), "battery_capacity")?;
    if m > MAX_BATTERY_STATES {
        return Err(OracleError::Resource(format!("battery capacity {m} exceeds the {MAX_BATTERY_STATES}-state cap")));
    }
    let k = match cfg.mode {
        Mode::Joint => {
            let k = as_integer(cfg.buffer_capacity.unwrap().to_f64().unwrap(), "buffer_capacity")?;
            if k > MAX_BUFFER_STATES {
                return Err(OracleError::Resource(format!("buffer capacity {k} exceeds the {MAX_BUFFER_STATES}-state cap")));
            }
            k
        }
        Mode::BatteryOnly => 0,
    };

    let repl_support = integer_support(&cfg.replenishment, "replenishment")?;
    let arr_support = match cfg.mode {
        Mode::Joint => integer_support(cfg.arrivals.as_ref().expect("validated"), "arrivals")?,
        Mode::BatteryOnly => vec![(0u64, 1.0f64)],
    };

    let b0 = as_integer(cfg.effective_initial_battery().to_f64().unwrap(), "initial_battery")?;
    let q0 = as_integer(cfg.effective_initial_queue().to_f64().unwrap(), "initial_queue")?;

    let lattice = Lattice { battery_states: m + 1, queue_states: k + 1 };
    let n = lattice.len();

    // Per-state transition lists and per-state expected slot statistics,
    // produced by the very same step() the simulator runs.
    let mut transitions: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut discharge = vec![0.0f64; n];
    let mut loss = vec![0.0f64; n];
    let mut utility = vec![0.0f64; n];
    let mut energy = vec![0.0f64; n];

    for b in 0..=m {
        for q in 0..=k {
            let idx = lattice.index(b, q);
            let state = NodeState {
                battery: real::<S>(b as f64),
                queue: real::<S>(q as f64),
                slot: 0,
            };
            for &(rv, rp) in &repl_support {
                for &(av, ap) in &arr_support {
                    let p = rp * ap;
                    if p == 0.0 {
                        continue;
                    }
                    let (next, rec) = step(&state, cfg, real::<S>(rv as f64), real::<S>(av as f64));
                    let nb = as_integer(next.battery.to_f64().unwrap(), "next battery")
                        .map_err(|_| non_lattice(b, q, rv, av, "battery", next.battery.to_f64().unwrap()))?;
                    let nq = as_integer(next.queue.to_f64().unwrap(), "next queue")
                        .map_err(|_| non_lattice(b, q, rv, av, "queue", next.queue.to_f64().unwrap()))?;
                    let to = lattice.index(nb, nq) as u32;
                    transitions[idx].push((to, p));
                    discharge[idx] += p * f64::from(rec.discharged);
                    loss[idx] += p * f64::from(rec.data_lost > S::zero());
                    utility[idx] += p * rec.utility.to_f64().unwrap();
                    energy[idx] += p * rec.consumed.to_f64().unwrap();
                }
            }
        }
    }

    // Restrict to states reachable from the initial state, find the closed
    // communicating class, and reject ambiguous or periodic chains.
    let start = lattice.index(b0, q0);
    let reachable = reachable_from(&transitions, start);
    let class = terminal_class(&transitions, &reachable)?;
    check_aperiodic(&transitions, &class)?;

    let pi = stationary_distribution(&transitions, &class)?;

    let mut p_discharge = 0.0;
    let mut p_loss = 0.0;
    let mut avg_utility = 0.0;
    let mut mean_energy = 0.0;
    for (state, weight) in class.iter().zip(&pi) {
        p_discharge += weight * discharge[*state];
        p_loss += weight * loss[*state];
        avg_utility += weight * utility[*state];
        mean_energy += weight * energy[*state];
    }

    let exact = |v: f64| Estimate { value: real::<S>(v), half_width: S::zero() };
    Ok(Metrics {
        p_discharge: exact(p_discharge),
        p_loss: match cfg.mode {
            Mode::Joint => Some(exact(p_loss)),
            Mode::BatteryOnly => None,
        },
        avg_utility: exact(avg_utility),
        mean_energy: exact(mean_energy),
        n_batches: 0,
        slots_measured: 0,
    })
}

fn non_lattice(b: u64, q: u64, r: u64, a: u64, what: &str, value: f64) -> OracleError {
    OracleError::NonInteger(format!(
        "from state (B={b}, Q={q}) with r={r}, a={a} the next {what} is {value}; \
         use integer policy draws and a rate function that keeps service integral"
    ))
}

fn integer_support<S: Scalar>(
    source: &crate::processes::ProcessSource<S>,
    what: &'static str,
) -> Result<Vec<(u64, f64)>, OracleError> {
    let support = source.finite_support().ok_or(OracleError::NonFiniteSupport(what))?;
    let mut out = Vec::with_capacity(support.len());
    for (v, p) in support {
        let vi = as_integer(v.to_f64().unwrap(), what)?;
        out.push((vi, p.to_f64().unwrap()));
    }
    Ok(out)
}

fn reachable_from(transitions: &[Vec<(u32, f64)>], start: usize) -> Vec<usize> {
    let mut seen = vec![false; transitions.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(s) = stack.pop() {
        for &(to, _) in &transitions[s] {
            let to = to as usize;
            if !seen[to] {
                seen[to] = true;
                stack.push(to);
            }
        }
    }
    (0..transitions.len()).filter(|&i| seen[i]).collect()
}

/// The unique closed communicating class among the reachable states, or a
/// decomposition error when there is more than one (the long-run law
/// would depend on which one the chain falls into).
fn terminal_class(
    transitions: &[Vec<(u32, f64)>],
    reachable: &[usize],
) -> Result<Vec<usize>, OracleError> {
    // Kosaraju-style double sweep restricted to the reachable states.
    let in_scope: std::collections::HashSet<usize> = reachable.iter().copied().collect();
    let mut order = Vec::with_capacity(reachable.len());
    let mut visited = std::collections::HashSet::new();
    for &root in reachable {
        if visited.contains(&root) {
            continue;
        }
        // Iterative post-order.
        let mut stack = vec![(root, 0usize)];
        visited.insert(root);
        while let Some(&(node, edge)) = stack.last() {
            let outs = &transitions[node];
            if edge < outs.len() {
                stack.last_mut().expect("nonempty").1 += 1;
                let to = outs[edge].0 as usize;
                if in_scope.contains(&to) && visited.insert(to) {
                    stack.push((to, 0));
                }
            } else {
                order.push(node);
                stack.pop();
            }
        }
    }

    let mut reverse: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for &s in reachable {
        for &(to, _) in &transitions[s] {
            let to = to as usize;
            if in_scope.contains(&to) {
                reverse.entry(to).or_default().push(s);
            }
        }
    }

    let mut component = std::collections::HashMap::new();
    let mut n_components = 0usize;
    for &node in order.iter().rev() {
        if component.contains_key(&node) {
            continue;
        }
        let id = n_components;
        n_components += 1;
        let mut stack = vec![node];
        component.insert(node, id);
        while let Some(s) = stack.pop() {
            if let Some(preds) = reverse.get(&s) {
                for &p in preds {
                    if let std::collections::hash_map::Entry::Vacant(slot) = component.entry(p) {
                        slot.insert(id);
                        stack.push(p);
                    }
                }
            }
        }
    }

    let mut is_terminal = vec![true; n_components];
    for &s in reachable {
        let cs = component[&s];
        for &(to, _) in &transitions[s] {
            let ct = component[&(to as usize)];
            if ct != cs {
                is_terminal[cs] = false;
            }
        }
    }
    let terminals: Vec<usize> = (0..n_components).filter(|&c| is_terminal[c]).collect();
    if terminals.len() != 1 {
        return Err(OracleError::Decomposition(format!(
            "{} closed classes reachable from the initial state (chain is reducible)",
            terminals.len()
        )));
    }
    let class = terminals[0];
    let mut states: Vec<usize> = reachable.iter().copied().filter(|s| component[s] == class).collect();
    states.sort_unstable();
    Ok(states)
}

fn check_aperiodic(transitions: &[Vec<(u32, f64)>], class: &[usize]) -> Result<(), OracleError> {
    let in_class: std::collections::HashSet<usize> = class.iter().copied().collect();
    let mut level: std::collections::HashMap<usize, i64> = std::collections::HashMap::new();
    let root = class[0];
    level.insert(root, 0);
    let mut queue = std::collections::VecDeque::from([root]);
    let mut period: i64 = 0;
    while let Some(s) = queue.pop_front() {
        let ls = level[&s];
        for &(to, _) in &transitions[s] {
            let to = to as usize;
            if !in_class.contains(&to) {
                continue;
            }
            match level.get(&to) {
                None => {
                    level.insert(to, ls + 1);
                    queue.push_back(to);
                }
                Some(&lt) => {
                    period = gcd(period, (ls + 1 - lt).abs());
                }
            }
        }
    }
    if period != 1 {
        return Err(OracleError::Decomposition(format!("chain is periodic with period {period}")));
    }
    Ok(())
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn stationary_distribution(
    transitions: &[Vec<(u32, f64)>],
    class: &[usize],
) -> Result<Vec<f64>, OracleError> {
    let n = class.len();
    let mut local_index = std::collections::HashMap::with_capacity(n);
    for (i, &s) in class.iter().enumerate() {
        local_index.insert(s, i);
    }
    // Local transition lists (the class is closed, so all targets map).
    let local: Vec<Vec<(usize, f64)>> = class
        .iter()
        .map(|&s| {
            transitions[s]
                .iter()
                .map(|&(to, p)| (local_index[&(to as usize)], p))
                .collect()
        })
        .collect();

    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0f64; n];
    let max_iter = 5_000_000usize;
    for iter in 0..max_iter {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, outs) in local.iter().enumerate() {
            let w = pi[i];
            if w == 0.0 {
                continue;
            }
            for &(to, p) in outs {
                next[to] += w * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let residual: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if residual < STATIONARY_RESIDUAL {
            return Ok(pi);
        }
        if iter == max_iter - 1 {
            return Err(OracleError::NoConvergence(max_iter));
        }
    }
    unreachable!()
}

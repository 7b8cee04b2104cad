//! Gnuplot script emission. Scripts embed their data inline so they are
//! standalone; rendering stays outside this tool.

use std::fmt::Write;

use emsim_core::analysis::TradeoffPoint;
use emsim_core::{Metrics, Real};

use crate::config::{SweepAxis, SweepSpec};

fn block_name(policy: &str, idx: usize) -> String {
    format!("${}_{}", policy.replace('-', "_"), idx)
}

/// One log-scale plot per probability metric, empirical points with error
/// bars plus theory lines where available.
pub fn sweep_script(
    spec: &SweepSpec,
    cells: &[(String, Real, Option<(Metrics<Real>, String, String)>)],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script generated by emsim; render with: gnuplot sweep_plot.gp");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set datafile missing \"NaN\"");
    let _ = writeln!(s, "set key left bottom");
    let _ = writeln!(s, "set xlabel \"{}\"", spec.axis.name());
    match spec.axis {
        SweepAxis::Battery | SweepAxis::Buffer => {
            let _ = writeln!(s, "set logscale xy");
        }
        _ => {
            let _ = writeln!(s, "set logscale y");
        }
    }

    // Inline data blocks: value, p_discharge, hw, theory_d, p_loss, hw, theory_l.
    let mut series: Vec<(String, String)> = Vec::new();
    for (idx, policy) in spec.policies.iter().map(|p| p.name()).enumerate() {
        let name = block_name(policy, idx);
        let mut block = String::new();
        let _ = writeln!(block, "{name} << EOD");
        for (cell_policy, value, outcome) in cells {
            if cell_policy != policy {
                continue;
            }
            if let Some((metrics, theory_d, theory_l)) = outcome {
                let opt = |x: &str| if x.is_empty() { "NaN".to_string() } else { x.to_string() };
                let (loss, loss_hw) = match &metrics.p_loss {
                    Some(l) => (format!("{:e}", l.value), format!("{:e}", l.half_width)),
                    None => ("NaN".into(), "NaN".into()),
                };
                let _ = writeln!(
                    block,
                    "{value:e} {:e} {:e} {} {loss} {loss_hw} {}",
                    metrics.p_discharge.value,
                    metrics.p_discharge.half_width,
                    opt(theory_d),
                    opt(theory_l),
                );
            }
        }
        let _ = writeln!(block, "EOD");
        s.push_str(&block);
        series.push((policy.to_string(), name));
    }

    let plot_metric = |s: &mut String, output: &str, ylabel: &str, val_col: u32, hw_col: u32, theory_col: u32| {
        let _ = writeln!(s, "set output \"{output}\"");
        let _ = writeln!(s, "set ylabel \"{ylabel}\"");
        let mut terms = Vec::new();
        for (policy, name) in &series {
            terms.push(format!(
                "{name} using 1:{val_col}:{hw_col} with yerrorbars title \"{policy} (sim)\""
            ));
            terms.push(format!(
                "{name} using 1:{theory_col} with lines title \"{policy} (theory)\""
            ));
        }
        let _ = writeln!(s, "plot \\\n  {}", terms.join(", \\\n  "));
    };
    plot_metric(&mut s, "sweep_discharge.png", "battery discharge probability", 2, 3, 4);
    if spec.base.arrivals.is_some() {
        plot_metric(&mut s, "sweep_loss.png", "data loss probability", 5, 6, 7);
    }
    s
}

/// Discharge-versus-loss exponent tradeoff curve.
pub fn tradeoff_script(curve: &[TradeoffPoint<Real>]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script generated by emsim; render with: gnuplot tradeoff_plot.gp");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "$curve << EOD");
    for p in curve {
        let _ = writeln!(s, "{:e} {:e} {:e}", p.drift, p.discharge_exponent, p.loss_exponent);
    }
    let _ = writeln!(s, "EOD");
    let _ = writeln!(s, "set output \"tradeoff.png\"");
    let _ = writeln!(s, "set xlabel \"battery discharge decay exponent (per unit capacity)\"");
    let _ = writeln!(s, "set ylabel \"data loss decay exponent (per unit capacity)\"");
    let _ = writeln!(s, "plot $curve using 2:3 with lines title \"achievable exponent pairs\"");
    s
}

use std::io::Write;

use crate::dynamics::Trajectory;
use crate::error::Result;
use crate::geometry::Metric;

/// `t,x0..x{d-1},segment_index`, one row per integration step. The segment
/// index is the policy index active over the step that starts at `t`; the
/// final row repeats the last one.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory, dt: f64) -> Result<()> {
    let d = traj.states.first().map_or(0, Vec::len);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..d).map(|k| format!("x{k}")))
        .chain(std::iter::once("segment_index".to_string()))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    let segs = &traj.applied_segments;
    let mut cur = 0;
    for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let step_t = k as f64 * dt;
        while cur + 1 < segs.len() && segs[cur + 1].start <= step_t + 1e-9 * dt {
            cur += 1;
        }
        let seg = segs.get(cur).map_or(0, |s| s.index);
        let row: Vec<String> = x.iter().map(f64::to_string).collect();
        writeln!(w, "{t},{},{seg}", row.join(","))?;
    }
    Ok(())
}

/// One line of the simulation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub id: usize,
    pub start: Vec<f64>,
    pub max_violation: f64,
    pub settle_time: Option<f64>,
    pub final_distance: f64,
}

pub fn write_summary_csv<W: Write>(mut w: W, rows: &[SummaryRow]) -> Result<()> {
    let d = rows.first().map_or(0, |r| r.start.len());
    let starts: Vec<String> = (0..d).map(|k| format!("x0_{k}")).collect();
    writeln!(w, "id,{},max_violation,time_to_c_ball,final_distance", starts.join(","))?;
    for r in rows {
        let x: Vec<String> = r.start.iter().map(f64::to_string).collect();
        let settle = r.settle_time.map_or_else(|| "nan".to_string(), |t| t.to_string());
        writeln!(w, "{},{},{},{settle},{}", r.id, x.join(","), r.max_violation, r.final_distance)?;
    }
    Ok(())
}

/// Mean and max of `‖φ(t) − x*‖` across trajectories sampled on a common
/// time grid.
pub fn write_mean_norm_csv<W: Write>(mut w: W, trajs: &[Trajectory], metric: &Metric, x_star: &[f64]) -> Result<()> {
    writeln!(w, "t,mean_norm,max_norm")?;
    let n = trajs.iter().map(|t| t.states.len()).min().unwrap_or(0);
    for k in 0..n {
        let d: Vec<f64> = trajs.iter().map(|t| metric.dist(&t.states[k], x_star)).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let max = d.iter().copied().fold(0.0, f64::max);
        writeln!(w, "{},{mean},{max}", trajs[0].times[k])?;
    }
    Ok(())
}

use std::io::Write;

use clap::Args;
use serde_json::json;

use super::{CliError, CliResult, Ctx};
use crate::config::load_config;
use crate::display::{
    forward_kinematics, inverse_kinematics, workspace_contains, Branch, JointAngles, KinematicsError,
    LinkageGeometry, Point,
};

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("query").required(true).args(["fk", "ik", "workspace"]))]
pub struct KinematicsArgs {
    /// Motor angles in degrees
    #[arg(long, num_args = 2, value_names = ["THETA1", "THETA2"])]
    pub fk: Option<Vec<f64>>,
    /// Effector position in mm
    #[arg(long, num_args = 2, value_names = ["X", "Y"])]
    pub ik: Option<Vec<f64>>,
    /// Reachability grid as CSV
    #[arg(long)]
    pub workspace: bool,
    /// Grid spacing in mm
    #[arg(long, default_value_t = 1.0, requires = "workspace")]
    pub step: f64,
    /// Which configured linkage to use
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub linkage: u8,
    #[arg(long, value_name = "MM")]
    pub base_separation: Option<f64>,
    #[arg(long, value_name = "MM")]
    pub proximal: Option<f64>,
    #[arg(long, value_name = "MM")]
    pub distal: Option<f64>,
    /// Lower joint limit, degrees
    #[arg(long, value_name = "DEG")]
    pub angle_min: Option<f64>,
    /// Upper joint limit, degrees
    #[arg(long, value_name = "DEG")]
    pub angle_max: Option<f64>,
    /// Pick the upper circle intersection in forward kinematics
    #[arg(long)]
    pub elbow_in: bool,
}

fn geometry(ctx: &Ctx, a: &KinematicsArgs) -> Result<LinkageGeometry, CliError> {
    let cfg = load_config(ctx.config_path)?;
    let mut g = cfg.display.linkages[a.linkage as usize - 1];
    if let Some(v) = a.base_separation {
        g.base_separation_mm = v;
    }
    if let Some(v) = a.proximal {
        g.proximal_length_mm = v;
    }
    if let Some(v) = a.distal {
        g.distal_length_mm = v;
    }
    if let Some(v) = a.angle_min {
        g.angle_min_rad = v.to_radians();
    }
    if let Some(v) = a.angle_max {
        g.angle_max_rad = v.to_radians();
    }
    if a.elbow_in {
        g.branch = Branch::ElbowIn;
    }
    g.validate().map_err(|e| CliError::Input(format!("invalid geometry: {e}")))?;
    Ok(g)
}

pub fn run(ctx: &mut Ctx, a: &KinematicsArgs) -> CliResult {
    let g = geometry(ctx, a)?;
    if let Some(v) = &a.fk {
        let angles = JointAngles::from_degrees(v[0], v[1]);
        match forward_kinematics(&g, angles) {
            Ok(p) if ctx.json => writeln!(ctx.out, "{}", json!({ "x_mm": p.x, "y_mm": p.y }))?,
            Ok(p) => writeln!(ctx.out, "{:.3} {:.3}", p.x, p.y)?,
            Err(_) if ctx.json => writeln!(ctx.out, "{}", json!({ "singular": true }))?,
            Err(_) => writeln!(ctx.out, "singular")?,
        }
    } else if let Some(v) = &a.ik {
        let target = Point::new(v[0], v[1]);
        match inverse_kinematics(&g, target) {
            Ok(q) => {
                let (t1, t2) = (q.theta1_rad.to_degrees(), q.theta2_rad.to_degrees());
                if ctx.json {
                    writeln!(ctx.out, "{}", json!({ "theta1_deg": t1, "theta2_deg": t2 }))?;
                } else {
                    writeln!(ctx.out, "{t1:.3} {t2:.3}")?;
                }
            }
            Err(KinematicsError::Unreachable { nearest, .. }) => {
                if ctx.json {
                    writeln!(ctx.out, "{}", json!({ "unreachable": true, "nearest": { "x_mm": nearest.x, "y_mm": nearest.y } }))?;
                } else {
                    writeln!(ctx.out, "unreachable; nearest {:.3} {:.3}", nearest.x, nearest.y)?;
                }
            }
            Err(e) => return Err(CliError::Input(e.to_string())),
        }
    } else {
        if !(a.step.is_finite() && a.step > 0.0) {
            return Err(CliError::Input(format!("--step must be positive, got {}", a.step)));
        }
        let reach = g.proximal_length_mm + g.distal_length_mm;
        let (x0, x1) = (-reach, g.base_separation_mm + reach);
        let (y0, y1) = (-reach, reach);
        let nx = ((x1 - x0) / a.step).floor() as usize;
        let ny = ((y1 - y0) / a.step).floor() as usize;
        let mut w = std::io::BufWriter::new(&mut *ctx.out);
        writeln!(w, "x_mm,y_mm,reachable")?;
        for j in 0..=ny {
            let y = y0 + j as f64 * a.step;
            for i in 0..=nx {
                let x = x0 + i as f64 * a.step;
                writeln!(w, "{x:.3},{y:.3},{}", workspace_contains(&g, Point::new(x, y)))?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

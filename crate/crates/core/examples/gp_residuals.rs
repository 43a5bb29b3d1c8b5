//! Collects driving data on grass and mud, fits one residual GP per terrain
//! and compares their predictive variance on the same maneuver.
//!
//! cargo run --example gp_residuals

use offroad_nav::dynamics::{ControlInput, VehicleParams, VehicleState};
use offroad_nav::gp::{fit, gp_features, GpFitConfig};
use offroad_nav::sim_world::{collect_training_data, CollectConfig, ScenarioParams};
use offroad_nav::terrain::Attitude;

fn main() -> offroad_nav::Result<()> {
    let p = VehicleParams::default();
    let world = ScenarioParams::default().build()?;
    let data = collect_training_data(&world, &p, &CollectConfig::default(), 0)?;

    let state = VehicleState { vx: 2.0, vy: 0.05, yaw_rate: 0.4, ..Default::default() };
    let input = ControlInput { steer: 0.2, accel: 0.5 };
    let x = gp_features(&state, &input, &Attitude::default());

    for (class, d) in &data.per_class {
        let (model, report) = fit(d, class.name(), &GpFitConfig::default())?;
        println!("{class}: {} samples, {} used for fitting", d.len(), report.points_used);
        for (name, o) in ["dvx", "dvy", "dwz"].iter().zip(&report.outputs) {
            let h = o.hyperparameters;
            println!(
                "  {name}: log-lik {:8.1} -> {:8.1}  signal {:.2e} noise {:.2e}",
                o.initial_log_likelihood, o.final_log_likelihood, h.signal_var, h.noise_var
            );
        }
        let pred = model.predict(&x);
        println!("  at vx=2, steer=0.2: mean {:+.4?} std {:.4?}", pred.mean, pred.variance.map(f64::sqrt));
    }
    Ok(())
}

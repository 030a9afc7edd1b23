//! Browser bindings: curvature figures, one-cycle simulation of a circular
//! gait, and the turning-rate scan over circles through the folded shape.

use std::cell::RefCell;
use std::collections::HashMap;

use liftgait::connection::{Coordinates, ShapeGrid};
use liftgait::curvature::ccf_grid_snapshot;
use liftgait::gait::Gait;
use liftgait::linkage::{Direction, Shape, SystemModel};
use liftgait::optimize::{circle_sweep, local_maxima};
use liftgait::render::{Figure, ScalarGrid};
use liftgait::simulate::evaluate_gait;
use wasm_bindgen::prelude::*;

/// Coarser than the CLI default to keep the page responsive.
const RESOLUTION: usize = 48;
const STEPS: usize = 200;

thread_local! {
    static GRIDS: RefCell<HashMap<String, &'static ShapeGrid>> = RefCell::new(HashMap::new());
}

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn grid(system: &str) -> Result<&'static ShapeGrid, JsValue> {
    if let Some(g) = GRIDS.with(|m| m.borrow().get(system).copied()) {
        return Ok(g);
    }
    let model = SystemModel::preset(system).map_err(err)?;
    let g: &'static ShapeGrid =
        Box::leak(Box::new(ShapeGrid::build(&model, RESOLUTION, Coordinates::MinimumPerturbation).map_err(err)?));
    GRIDS.with(|m| m.borrow_mut().insert(system.to_string(), g));
    Ok(g)
}

fn component(name: &str) -> Result<Direction, JsValue> {
    match name {
        "x" => Ok(Direction::X),
        "y" => Ok(Direction::Y),
        "theta" => Ok(Direction::Theta),
        other => Err(err(format!("unknown component '{other}'"))),
    }
}

/// SVG of the shape-plane curvature (contours) and the momentum-induced
/// curvature (arrows) for one fiber component at angular momentum `momentum`.
#[wasm_bindgen]
pub fn curvature_svg(system: &str, component_name: &str, momentum: f64) -> Result<String, JsValue> {
    let grid = grid(system)?;
    let k = component(component_name)?.index();
    let field = ccf_grid_snapshot(grid, &(Direction::Theta.unit() * momentum));
    let d12: Vec<f64> = field.samples.iter().map(|s| s.d12[k]).collect();
    let arrows: Vec<[f64; 2]> = field.samples.iter().map(|s| [s.d1t[k], s.d2t[k]]).collect();
    let layout = grid.layout();
    let direction = if system == "snake" { Direction::Theta } else { Direction::X };
    let title = format!("{system}: {component_name} curvature at L = {momentum}");
    let mut fig = Figure::new(grid.minimum_inertia_shape(direction), &title);
    fig.contours(&ScalarGrid { layout, values: &d12 }).arrows(layout, &arrows);
    Ok(fig.to_svg())
}

/// One cycle of a circular gait; JSON with displacement, velocity and effort.
#[wasm_bindgen]
pub fn simulate_circle(
    system: &str,
    alpha1: f64,
    alpha2: f64,
    radius: f64,
    period: f64,
    momentum: f64,
) -> Result<String, JsValue> {
    let grid = grid(system)?;
    let gait = Gait::circle(Shape::new(alpha1, alpha2), radius, period).map_err(err)?;
    let (_, out) = evaluate_gait(grid, &gait, &(Direction::Theta.unit() * momentum), STEPS).map_err(err)?;
    serde_json::to_string(&out).map_err(err)
}

/// Snake turning rate over circles through the folded shape, each at the
/// fastest period the unit effort bound allows; JSON rows per radius.
#[wasm_bindgen]
pub fn circle_scan(momentum: f64, radii: usize, max_radius: f64) -> Result<String, JsValue> {
    if radii < 2 {
        return Err(err("need at least 2 radii"));
    }
    let grid = grid("snake")?;
    let r: Vec<f64> = (0..radii).map(|k| max_radius * k as f64 / (radii - 1) as f64).collect();
    let cs = circle_sweep(grid, &r, &[momentum], 1.0, STEPS).map_err(err)?;
    let maxima = local_maxima(&cs.rows[0]);
    let value = serde_json::json!({ "points": cs.rows[0], "maxima": maxima });
    Ok(value.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_and_simulation_run_natively() {
        let svg = curvature_svg("snake", "theta", 0.1).unwrap();
        assert!(svg.starts_with("<svg"));
        let out: serde_json::Value = serde_json::from_str(&simulate_circle("swimmer", 0.0, 0.0, 0.5, 1.0, 0.0).unwrap()).unwrap();
        assert!(out["effort"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn scan_reports_points_and_maxima() {
        let v: serde_json::Value = serde_json::from_str(&circle_scan(0.05, 6, 2.5).unwrap()).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 6);
        assert!(!v["maxima"].as_array().unwrap().is_empty());
    }
}

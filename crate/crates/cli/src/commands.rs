//! Subcommand bodies and file emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use liftgait::connection::{Coordinates, ShapeGrid};
use liftgait::curvature::{ccf_grid_snapshot, CcfField};
use liftgait::gait::Gait;
use liftgait::linkage::Direction;
use liftgait::optimize::{
    baseline_kinematic, baseline_momentum, circle_sweep, crossover_momentum, default_initial_gait, kinematic_solution,
    linear_levels, solve, sweep_from, Problem, Solution,
};
use liftgait::render::{Figure, ScalarGrid};
use liftgait::se2::Covector;
use liftgait::simulate::evaluate_gait;
use liftgait::verify::{Verifier, CRITERIA, LOW_LEVEL_FRACTION, SWEEP_LEVELS, SWEEP_REACH};
use serde::Serialize;

use crate::runspec::RunSpec;
use crate::CliError;

const COMPONENTS: [&str; 3] = ["x", "y", "theta"];

pub struct Context {
    spec: RunSpec,
    out: PathBuf,
    grid: ShapeGrid,
    direction: Direction,
}

impl Context {
    pub fn new(spec: RunSpec, out: PathBuf) -> Result<Self, CliError> {
        let model = spec.system.model()?;
        let grid = ShapeGrid::build(&model, spec.resolution, Coordinates::MinimumPerturbation)?;
        let direction = spec.direction();
        Ok(Self { spec, out, grid, direction })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("cannot create {}: {e}", dir.display())))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    fn figure_center(&self) -> liftgait::linkage::Shape {
        self.grid.minimum_inertia_shape(self.direction)
    }

    fn kinematic(&self) -> Result<Solution, CliError> {
        let initial = default_initial_gait(&self.grid, self.direction)?;
        Ok(kinematic_solution(&self.grid, self.direction, self.spec.settings, initial)?)
    }

    fn crossover(&self, kinematic: &Solution) -> Result<f64, CliError> {
        Ok(crossover_momentum(&self.grid, self.direction, &kinematic.gait, self.spec.settings.steps)?)
    }

    /// Explicit levels, else the run spec's, else the default sweep grid.
    fn levels(&self, levels: Option<Vec<f64>>, kinematic: &Solution) -> Result<Vec<f64>, CliError> {
        let levels = match levels.or_else(|| self.spec.momentum_levels.clone()) {
            Some(l) => l,
            None => linear_levels(SWEEP_REACH * self.crossover(kinematic)?, SWEEP_LEVELS),
        };
        if levels.first() != Some(&0.0) || levels.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Invalid("levels must ascend strictly from 0".into()));
        }
        Ok(levels)
    }

    pub fn fields(&self, ccf: bool, momentum: f64) -> Result<(), CliError> {
        let layout = self.grid.layout();
        let nodes: Vec<usize> = (0..layout.len()).collect();
        let shape_cols = |idx: usize| {
            let r = self.grid.node_shape(idx);
            vec![r.alpha1, r.alpha2]
        };

        let connection = csv(
            &["alpha1", "alpha2", "A_x1", "A_x2", "A_y1", "A_y2", "A_theta1", "A_theta2"],
            nodes.iter().map(|&i| {
                let a = self.grid.node_sample(i).a;
                let mut row = shape_cols(i);
                row.extend((0..3).flat_map(|k| [a[(k, 0)], a[(k, 1)]]));
                row
            }),
        );
        self.write("connection.csv", &connection)?;

        let matrix_header = |prefix: &str| {
            let mut h = vec!["alpha1".to_string(), "alpha2".to_string()];
            h.extend((0..9).map(|k| format!("{prefix}{}{}", k / 3, k % 3)));
            h
        };
        let factor = csv_owned(
            &matrix_header("Minv_"),
            nodes.iter().map(|&i| {
                let m = self.grid.node_sample(i).mgg_inv;
                let mut row = shape_cols(i);
                row.extend((0..9).map(|k| m[(k / 3, k % 3)]));
                row
            }),
        );
        self.write("momentum_factor.csv", &factor)?;

        let inertia = csv_owned(
            &matrix_header("I_"),
            nodes.iter().map(|&i| {
                let m = self.grid.node_locked_inertia(i);
                let mut row = shape_cols(i);
                row.extend((0..9).map(|k| m[(k / 3, k % 3)]));
                row
            }),
        );
        self.write("locked_inertia.csv", &inertia)?;

        let beta = csv(
            &["alpha1", "alpha2", "beta_x", "beta_y", "beta_theta"],
            nodes.iter().map(|&i| {
                let b = self.grid.node_beta(i);
                let mut row = shape_cols(i);
                row.extend([b.x, b.y, b.theta]);
                row
            }),
        );
        self.write("beta.csv", &beta)?;

        let still = ccf_grid_snapshot(&self.grid, &Covector::zeros());
        for (k, name) in COMPONENTS.iter().enumerate() {
            let d12: Vec<f64> = still.samples.iter().map(|s| s.d12[k]).collect();
            let arrows: Vec<[f64; 2]> = nodes
                .iter()
                .map(|&i| {
                    let a = self.grid.node_sample(i).a;
                    [-a[(k, 0)], -a[(k, 1)]]
                })
                .collect();
            let mut fig = Figure::new(self.figure_center(), &format!("{}: -A {name} row, D12 {name}", self.grid.model().name));
            fig.contours(&ScalarGrid { layout, values: &d12 }).arrows(layout, &arrows);
            self.write(&format!("fields_{name}.svg"), &fig.to_svg())?;
        }

        if ccf {
            let p = self.direction.unit() * momentum;
            let field = ccf_grid_snapshot(&self.grid, &p);
            self.write("ccf.csv", &ccf_csv(&self.grid, &field))?;
            for (k, name) in COMPONENTS.iter().enumerate() {
                let d12: Vec<f64> = field.samples.iter().map(|s| s.d12[k]).collect();
                let arrows: Vec<[f64; 2]> = field.samples.iter().map(|s| [s.d1t[k], s.d2t[k]]).collect();
                let title = format!("{}: D12 {name} contours, (D1t, D2t) {name} arrows, p = {momentum}", self.grid.model().name);
                let mut fig = Figure::new(self.figure_center(), &title);
                fig.contours(&ScalarGrid { layout, values: &d12 }).arrows(layout, &arrows);
                self.write(&format!("ccf_{name}.svg"), &fig.to_svg())?;
            }
        }
        Ok(())
    }

    pub fn simulate(&self, gait: &Path, momentum: f64, steps: Option<usize>) -> Result<(), CliError> {
        let gait = read_gait(gait)?;
        let p = self.direction.unit() * momentum;
        let (traj, outcome) = evaluate_gait(&self.grid, &gait, &p, steps.unwrap_or(self.spec.settings.steps))?;
        let rows = traj.samples.iter().map(|s| {
            vec![
                s.t,
                s.shape.alpha1,
                s.shape.alpha2,
                s.shape_velocity[0],
                s.shape_velocity[1],
                s.pose.x,
                s.pose.y,
                s.pose.theta,
                s.body_velocity[0],
                s.body_velocity[1],
                s.body_velocity[2],
                s.shape_momentum[0],
                s.shape_momentum[1],
                s.force[0],
                s.force[1],
            ]
        });
        let header = [
            "t", "alpha1", "alpha2", "alpha1_dot", "alpha2_dot", "x", "y", "theta", "xi_x", "xi_y", "xi_theta", "p_r1",
            "p_r2", "u1", "u2",
        ];
        self.write("trajectory.csv", &csv(&header, rows))?;
        self.write_json("outcome.json", &outcome)?;
        println!(
            "displacement ({:.6}, {:.6}, {:.6}), velocity along {:?} {:.6}, effort {:.6}",
            outcome.displacement.x,
            outcome.displacement.y,
            outcome.displacement.theta,
            self.direction,
            outcome.velocity_along(self.direction),
            outcome.effort
        );
        Ok(())
    }

    pub fn optimize(&self, momentum: f64, initial: Option<&Path>) -> Result<(), CliError> {
        let initial = match initial {
            Some(path) => read_gait(path)?,
            None => default_initial_gait(&self.grid, self.direction)?,
        };
        let problem = Problem::new(&self.grid, self.direction, momentum, initial)?.with_settings(self.spec.settings)?;
        let s = solve(&problem)?;
        self.write_json("solution.json", &s)?;
        self.write("gait.json", &(s.gait.to_json()? + "\n"))?;
        let mut fig = self.gait_figure(&format!("{} optimum at p = {momentum}", self.grid.model().name));
        fig.gait(&s.gait, "#000");
        self.write("gait.svg", &fig.to_svg())?;
        println!(
            "velocity {:.6}, effort {:.6}, amplitude {:.4}, {} iterations, status {:?}",
            s.velocity,
            s.outcome.effort,
            s.gait.amplitude(),
            s.iterations,
            s.status
        );
        Ok(())
    }

    fn gait_figure(&self, title: &str) -> Figure {
        let field = ccf_grid_snapshot(&self.grid, &Covector::zeros());
        let d12: Vec<f64> = field.samples.iter().map(|s| s.d12[self.direction.index()]).collect();
        let mut fig = Figure::new(self.figure_center(), title);
        fig.contours(&ScalarGrid { layout: self.grid.layout(), values: &d12 });
        fig
    }

    pub fn sweep(&self, levels: Option<Vec<f64>>) -> Result<(), CliError> {
        let kinematic = self.kinematic()?;
        let levels = self.levels(levels, &kinematic)?;
        let result = sweep_from(&self.grid, self.direction, &levels, self.spec.settings, &kinematic)?;
        self.write_json("sweep.json", &result)?;
        let rows = result
            .levels
            .iter()
            .map(|l| vec![l.momentum, l.velocity, l.kinematic_velocity, l.momentum_velocity, l.amplitude, l.effort]);
        let header = ["level", "velocity_optimal", "velocity_kinematic", "velocity_momentum", "amplitude", "effort"];
        self.write("sweep.csv", &csv(&header, rows))?;
        let mut fig = self.gait_figure(&format!("{} optimal gaits, p = 0 (blue) to {:.4} (red)", result.system, levels[levels.len() - 1]));
        for (k, level) in result.levels.iter().enumerate() {
            if let Some(g) = &level.gait {
                self.write(&format!("gaits/level_{k:02}.json"), &(g.to_json()? + "\n"))?;
                let t = k as f64 / (levels.len() - 1).max(1) as f64;
                fig.gait(g, &format!("rgb({},{},{})", (40.0 + 200.0 * t) as u8, 60, (240.0 - 200.0 * t) as u8));
            }
        }
        self.write("sweep.svg", &fig.to_svg())?;
        let failed = result.levels.iter().filter(|l| l.error.is_some()).count();
        for l in &result.levels {
            println!(
                "p {:.5}: optimal {:.5}, kinematic {:.5}, momentum {:.5}, amplitude {:.4}",
                l.momentum, l.velocity, l.kinematic_velocity, l.momentum_velocity, l.amplitude
            );
        }
        if failed > 0 {
            return Err(CliError::Failed(format!("{failed} sweep levels failed; see sweep.json")));
        }
        Ok(())
    }

    pub fn circle_sweep(&self, radii: usize, max_radius: f64, levels: Option<Vec<f64>>) -> Result<(), CliError> {
        if self.direction != Direction::Theta {
            return Err(CliError::Invalid("circle-sweep analyses turning; use --direction theta".into()));
        }
        if radii < 2 || !(max_radius > 0.0) {
            return Err(CliError::Invalid("need at least 2 radii and a positive max radius".into()));
        }
        let levels = match levels {
            Some(l) => l,
            None => {
                let l = self.crossover(&self.kinematic()?)?;
                vec![LOW_LEVEL_FRACTION * l, l, SWEEP_REACH * l]
            }
        };
        let radii: Vec<f64> = (0..radii).map(|k| max_radius * k as f64 / (radii - 1) as f64).collect();
        let cs = circle_sweep(&self.grid, &radii, &levels, self.spec.settings.effort_bound, self.spec.settings.steps)?;
        self.write_json("circle_sweep.json", &cs)?;
        let rows = cs.levels.iter().zip(&cs.rows).flat_map(|(&l, row)| {
            row.iter().map(move |p| {
                vec![l, p.radius, p.period.unwrap_or(f64::NAN), p.kinematic, p.momentum_per_unit, p.momentum, p.total, p.effort]
            })
        });
        let header = ["level", "radius", "period", "kinematic", "momentum_per_unit", "momentum", "total", "effort"];
        self.write("circle_sweep.csv", &csv(&header, rows))?;
        for (l, row) in cs.levels.iter().zip(&cs.rows) {
            let maxima: Vec<String> =
                liftgait::optimize::local_maxima(row).iter().map(|&i| format!("{:.3}", radii[i])).collect();
            println!("p {l:.5}: local maxima at R = [{}]", maxima.join(", "));
        }
        Ok(())
    }

    pub fn baselines(&self, levels: Option<Vec<f64>>) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Level {
            momentum: f64,
            velocity_kinematic: f64,
            velocity_momentum: f64,
        }
        #[derive(Serialize)]
        struct Baselines {
            system: String,
            direction: Direction,
            crossover: f64,
            kinematic_gait: Gait,
            levels: Vec<Level>,
        }
        let kinematic = self.kinematic()?;
        let crossover = self.crossover(&kinematic)?;
        let levels = self.levels(levels, &kinematic)?;
        let steps = self.spec.settings.steps;
        let mut rows = Vec::with_capacity(levels.len());
        for &l in &levels {
            rows.push(Level {
                momentum: l,
                velocity_kinematic: baseline_kinematic(&self.grid, self.direction, l, &kinematic.gait, steps)?,
                velocity_momentum: baseline_momentum(&self.grid, self.direction, l),
            });
        }
        let table = csv(
            &["level", "velocity_kinematic", "velocity_momentum"],
            rows.iter().map(|r| vec![r.momentum, r.velocity_kinematic, r.velocity_momentum]),
        );
        self.write("baselines.csv", &table)?;
        let report = Baselines {
            system: self.grid.model().name.clone(),
            direction: self.direction,
            crossover,
            kinematic_gait: kinematic.gait,
            levels: rows,
        };
        self.write_json("baselines.json", &report)?;
        println!("crossover momentum {crossover:.6}");
        Ok(())
    }

    pub fn verify(&self, criteria: Option<Vec<usize>>) -> Result<(), CliError> {
        let ids = criteria.unwrap_or_else(|| (1..=CRITERIA).collect());
        if let Some(bad) = ids.iter().find(|&&id| !(1..=CRITERIA).contains(&id)) {
            return Err(CliError::Invalid(format!("no criterion {bad}; choose 1..={CRITERIA}")));
        }
        let verifier = Verifier::new()?.with_seed(self.spec.seed);
        let mut checks = Vec::with_capacity(ids.len());
        for id in ids {
            let check = verifier.run(id);
            println!("{check}");
            checks.push(check);
        }
        let failed = checks.iter().filter(|c| !c.passed).count();
        println!("{} of {} criteria passed", checks.len() - failed, checks.len());
        self.write_json("verify.json", &checks)?;
        if failed > 0 {
            return Err(CliError::Failed(format!("{failed} criteria failed")));
        }
        Ok(())
    }
}

fn read_gait(path: &Path) -> Result<Gait, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("cannot read gait {}: {e}", path.display())))?;
    Gait::from_json(&text).map_err(|e| CliError::Invalid(format!("gait {}: {e}", path.display())))
}

fn ccf_csv(grid: &ShapeGrid, field: &CcfField) -> String {
    let mut header = vec!["alpha1".to_string(), "alpha2".to_string()];
    for part in ["D12", "D1t", "D2t"] {
        header.extend(COMPONENTS.iter().map(|c| format!("{part}_{c}")));
    }
    let rows = field.samples.iter().enumerate().map(|(i, s)| {
        let r = grid.node_shape(i);
        let mut row = vec![r.alpha1, r.alpha2];
        for v in [s.d12, s.d1t, s.d2t] {
            row.extend(v.iter().copied());
        }
        row
    });
    csv_owned(&header, rows)
}

fn csv(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let owned: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    csv_owned(&owned, rows)
}

/// Numbers in shortest round-trip form (exponent form at extreme magnitudes);
/// non-finite values as `nan`.
fn csv_owned(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            if v.is_finite() && (*v == 0.0 || (1e-4..1e15).contains(&v.abs())) {
                let _ = write!(s, "{v}");
            } else if v.is_finite() {
                let _ = write!(s, "{v:e}");
            } else {
                s.push_str("nan");
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_round_trip() {
        let text = csv(&["a", "b"], [vec![0.1 + 0.2, -1e-300], vec![f64::NAN, 3.0]].into_iter());
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("a,b"));
        let line = lines.next().unwrap();
        assert!(line.ends_with(",-1e-300"), "{line}");
        let first: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first, vec![0.1 + 0.2, -1e-300]);
        assert_eq!(lines.next(), Some("nan,3"));
    }
}

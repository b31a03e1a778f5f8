use nalgebra::{Matrix2, Vector2};
use serde_json::{json, Value};
use std::fmt::Write as _;

use super::config::{ExperimentConfig, LoadedConfig, Mode, SweepParameter, TomographyTarget};
use super::output::{json_bytes, sidecar_name, Cell, RunOutput, Table};
use crate::compiler::{euler_decompose, plan_from_unitary, simulate_plan};
use crate::error::{SqzError, SqzResult};
use crate::gaussian::{GaussianState, SymplecticTransform};
use crate::metrology::{
    analytic_wigner, bootstrap_fidelity, classical_limit_fidelity, fidelity_gaussian,
    fidelity_gaussian_with_tolerance, noise_power_db,
};
use crate::squeezer::{
    ideal_output_map, nominal_gain, r_from_transmittance, run_deterministic, run_trajectory,
    squeezing_db_from_transmittance, ImperfectionModel, ProtocolConfig,
};
use crate::tomography::{reconstruct_wigner, simulate_phase_scan, state_from_scan, GridSpec};
use crate::units::db_to_nepers;

/// Squeezed-quadrature noise, anti-squeezed noise and fidelity reported for
/// the three transmittances of the reference experiment.
const MEASURED: [(f64, f64, f64, f64); 3] = [(0.75, 0.7, 1.3, 0.94), (0.5, 1.6, 3.0, 0.89), (0.25, 2.5, 5.8, 0.78)];

fn measured(t: f64) -> Option<(f64, f64, f64)> {
    MEASURED
        .iter()
        .find(|m| (m.0 - t).abs() < 1e-12)
        .map(|&(_, sq, anti, f)| (sq, anti, f))
}

/// Independent seed for sub-run `k` of a run seeded with `seed`.
fn derive_seed(seed: u64, k: u64) -> u64 {
    seed ^ (k.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// The exact unitary squeeze of `input` along `angle` that a squeezer of
/// transmittance `t` approximates.
pub fn squeeze_target(input: &GaussianState, t: f64, angle: f64) -> SqzResult<GaussianState> {
    input.apply(&SymplecticTransform::squeeze_at(r_from_transmittance(t)?, angle))
}

/// Noise powers (dB re shot noise) of the squeezed and anti-squeezed
/// quadratures for a squeezer acting along `angle`.
fn noise_pair(state: &GaussianState, angle: f64) -> SqzResult<(f64, f64)> {
    Ok((
        noise_power_db(state.marginal_variance(0, angle)?)?,
        noise_power_db(state.marginal_variance(0, angle + std::f64::consts::FRAC_PI_2)?)?,
    ))
}

struct Files<'a> {
    mode: Mode,
    loaded: &'a LoadedConfig,
    out: RunOutput,
}

impl<'a> Files<'a> {
    fn new(mode: Mode, loaded: &'a LoadedConfig) -> Self {
        Self {
            mode,
            loaded,
            out: RunOutput::default(),
        }
    }

    fn header(&self) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        m.insert("mode".into(), json!(self.mode.as_str()));
        m.insert("config_hash".into(), json!(self.loaded.hash));
        m.insert("seed".into(), json!(self.loaded.config.sampling.seed));
        m.insert("generator".into(), json!(concat!("sqzlab ", env!("CARGO_PKG_VERSION"))));
        m
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>, meta: Value) {
        let mut m = self.header();
        m.insert("file".into(), json!(name));
        if let Value::Object(extra) = meta {
            m.extend(extra);
        }
        self.out.files.insert(sidecar_name(name), json_bytes(Value::Object(m)));
        self.out.files.insert(name.to_string(), bytes);
    }

    fn table(&mut self, name: &str, table: &Table, meta: Value) {
        let mut meta = meta;
        if let Value::Object(m) = &mut meta {
            m.insert("columns".into(), table.column_descriptions());
        }
        self.add(name, table.to_csv().into_bytes(), meta);
    }

    fn summary(&mut self, body: Value) {
        let mut m = self.header();
        m.insert("config".into(), serde_json::to_value(&self.loaded.config).expect("config serializes"));
        if let Value::Object(extra) = body {
            m.extend(extra);
        }
        let bytes = json_bytes(Value::Object(m));
        self.add("summary.json", bytes, json!({"format": "JSON summary of the run"}));
    }
}

/// Runs `mode` with a validated configuration. All files are produced in
/// memory; nothing is written to disk.
pub fn run(mode: Mode, loaded: &LoadedConfig) -> SqzResult<RunOutput> {
    if let Some(m) = loaded.config.mode {
        if m != mode {
            return Err(SqzError::Unsupported(format!(
                "configuration is for mode `{m}` but `{mode}` was requested"
            )));
        }
    }
    let mut files = Files::new(mode, loaded);
    match mode {
        Mode::ReproducePaper => reproduce(&loaded.config, &mut files)?,
        Mode::Sweep => sweep(&loaded.config, &mut files)?,
        Mode::Tomography => tomography(&loaded.config, &mut files)?,
        Mode::Trajectory => trajectory(&loaded.config, &mut files)?,
        Mode::Compile => compile(&loaded.config, &mut files)?,
    }
    Ok(files.out)
}

fn reproduce(cfg: &ExperimentConfig, files: &mut Files<'_>) -> SqzResult<()> {
    let input = cfg.input.state();
    let angle = cfg.protocol.squeeze_angle;
    let vacuum = GaussianState::vacuum(1)?;
    let mut models = vec![("configured".to_string(), cfg.imperfections.to_model()?)];
    for p in &cfg.reproduce.compare_presets {
        let m = ImperfectionModel::preset(p).ok_or_else(|| SqzError::Unsupported(format!("unknown preset `{p}`")))?;
        models.push((p.clone(), m));
    }

    let mut table = Table::new(&[
        ("model", "imperfection model: the configured one or a named preset"),
        ("transmittance", "beam-splitter transmittance T"),
        ("nominal_db", "target squeezing -10 log10 T (dB)"),
        ("ideal_sq_db", "squeezed-quadrature noise, infinitely squeezed ancilla (dB re shot noise)"),
        ("ideal_antisq_db", "anti-squeezed-quadrature noise of the ideal squeezer (dB)"),
        ("finite_ancilla_sq_db", "squeezed-quadrature noise with the configured ancilla, no losses (dB)"),
        ("vacuum_ancilla_sq_db", "squeezed-quadrature noise with a vacuum ancilla (dB)"),
        ("model_sq_db", "squeezed-quadrature noise of the imperfect model (dB)"),
        ("model_antisq_db", "anti-squeezed-quadrature noise of the imperfect model (dB)"),
        ("suppression_db", "squeezed-quadrature suppression below shot noise, -model_sq_db (dB)"),
        ("fidelity", "fidelity of the model output to the unitary squeeze of the input"),
        ("fidelity_tomography", "fidelity from moments fitted to a simulated phase scan of the output"),
        ("fidelity_bootstrap_sd", "bootstrap standard deviation of the trajectory fidelity"),
        ("classical_limit", "vacuum-ancilla fidelity sqrt(2T/(1+T))"),
        ("measured_sq_db", "reported squeezed-quadrature suppression (dB), when T is a reported point"),
        ("measured_antisq_db", "reported anti-squeezed noise (dB), when T is a reported point"),
        ("measured_fidelity", "reported fidelity, when T is a reported point"),
    ]);

    let mut k = 0u64;
    for (name, model) in &models {
        for &t in &cfg.reproduce.transmittances {
            let protocol = |db: f64| -> SqzResult<ProtocolConfig> {
                let mut p = cfg.protocol.to_config()?;
                p.transmittance = t;
                p.ancilla_squeezing = db_to_nepers(db);
                Ok(p)
            };
            let p = protocol(cfg.protocol.ancilla_db)?;
            let ideal = ideal_output_map(&ProtocolConfig { ancilla_squeezing: f64::INFINITY, ..p }, &vacuum)?;
            let (ideal_sq, ideal_anti) = noise_pair(&ideal, angle)?;
            let (finite_sq, _) = noise_pair(&ideal_output_map(&p, &vacuum)?, angle)?;
            let (vac_sq, _) = noise_pair(&ideal_output_map(&protocol(0.0)?, &vacuum)?, angle)?;

            let out = run_deterministic(&p, model, &input)?.output;
            let (model_sq, model_anti) = noise_pair(&out, angle)?;
            let target = squeeze_target(&input, t, angle)?;
            let fidelity = fidelity_gaussian(&target, &out)?.fidelity;

            let seed = derive_seed(cfg.sampling.seed, k);
            k += 1;
            let scan = simulate_phase_scan(&out, cfg.sampling.n_phases, cfg.sampling.samples_per_phase, seed)?;
            let fitted = state_from_scan(&scan)?;
            let f_tomo = fidelity_gaussian_with_tolerance(&target, &fitted, f64::INFINITY)?.fidelity;
            let traj = run_trajectory(&p, model, &input, cfg.sampling.n_shots, seed)?;
            let boot = bootstrap_fidelity(&target, &traj.batches, cfg.sampling.bootstrap_resamples, seed)?;

            let m = measured(t);
            table.push(vec![
                name.as_str().into(),
                t.into(),
                squeezing_db_from_transmittance(t)?.into(),
                ideal_sq.into(),
                ideal_anti.into(),
                finite_sq.into(),
                vac_sq.into(),
                model_sq.into(),
                model_anti.into(),
                (-model_sq).into(),
                fidelity.into(),
                f_tomo.into(),
                boot.std_dev.into(),
                classical_limit_fidelity(t)?.into(),
                m.map(|m| m.0).into(),
                m.map(|m| m.1).into(),
                m.map(|m| m.2).into(),
            ]);
        }
    }

    let mut report = String::from("model                 T      sq dB   anti dB  fidelity  classical  measured\n");
    for row in &table.rows {
        let num = |c: &Cell| match c {
            Cell::Num(v) => format!("{v:.4}"),
            _ => "-".into(),
        };
        let name = match &row[0] {
            Cell::Text(s) => s.clone(),
            _ => String::new(),
        };
        let _ = writeln!(
            report,
            "{:<20} {:>5}  {:>7}  {:>7}  {:>8}  {:>9}  {} dB / {}",
            name,
            num(&row[1]),
            num(&row[7]),
            num(&row[8]),
            num(&row[10]),
            num(&row[13]),
            num(&row[14]),
            num(&row[16]),
        );
    }
    files.table("table.csv", &table, json!({"format": "CSV, one row per model and transmittance"}));
    files.summary(json!({ "rows": table.to_json() }));
    files.out.report = report;
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, files: &mut Files<'_>) -> SqzResult<()> {
    let input = cfg.input.state();
    let angle = cfg.protocol.squeeze_angle;
    let param = cfg.sweep.parameter;
    let base_protocol = cfg.protocol.to_config()?;
    let base_model = cfg.imperfections.to_model()?;

    let mut table = Table::new(&[
        ("value", "swept parameter value"),
        ("transmittance", "beam-splitter transmittance T"),
        ("ancilla_db", "ancilla squeezing (dB)"),
        ("gain", "feedforward gain applied"),
        ("sq_db", "squeezed-quadrature noise (dB re shot noise)"),
        ("antisq_db", "anti-squeezed-quadrature noise (dB)"),
        ("fidelity", "fidelity to the unitary squeeze of the input"),
        ("classical_limit", "vacuum-ancilla fidelity sqrt(2T/(1+T)) at this T"),
    ]);
    let mut best: Option<(f64, f64)> = None;
    for v in cfg.sweep.grid() {
        let mut p = base_protocol;
        let mut m = base_model;
        match param {
            SweepParameter::Transmittance => p.transmittance = v,
            SweepParameter::AncillaDb => p.ancilla_squeezing = db_to_nepers(v),
            SweepParameter::Gain => p.gain = Some(v),
            SweepParameter::GainError => m.gain_error = v,
            SweepParameter::HomodyneEfficiency => m.homodyne_efficiency = v,
            SweepParameter::DetectorEfficiency => m.detector_efficiency = v,
            SweepParameter::PropagationEfficiency => m.propagation_efficiency = v,
            SweepParameter::DisplacementCoupler => m.displacement_coupler = v,
            SweepParameter::PhaseJitterRad => m.phase_jitter_rad = v,
            SweepParameter::LoPhaseJitterRad => m.lo_phase_jitter_rad = Some(v),
            SweepParameter::ElectronicNoiseDb => m.electronic_noise_db = Some(v),
        }
        p.validate()?;
        m.validate()?;
        let out = run_deterministic(&p, &m, &input)?.output;
        let (sq, anti) = noise_pair(&out, angle)?;
        let target = squeeze_target(&input, p.transmittance, angle)?;
        let fidelity = fidelity_gaussian(&target, &out)?.fidelity;
        if best.is_none_or(|(_, a)| anti < a) {
            best = Some((v, anti));
        }
        table.push(vec![
            v.into(),
            p.transmittance.into(),
            crate::units::nepers_to_db(p.ancilla_squeezing).into(),
            p.gain()?.into(),
            sq.into(),
            anti.into(),
            fidelity.into(),
            classical_limit_fidelity(p.transmittance)?.into(),
        ]);
    }

    let mut body = json!({ "parameter": param.as_str(), "rows": table.to_json() });
    let mut report = format!("swept {} over {} points\n", param.as_str(), table.rows.len());
    if param == SweepParameter::Gain {
        // p-variance minimum over the grid against the nominal gain and the
        // closed-form minimizer for a lossless apparatus
        let t = base_protocol.transmittance;
        let (a, b) = (t.sqrt(), (1.0 - t).sqrt());
        let w = 0.25 * (2.0 * base_protocol.ancilla_squeezing).exp();
        let local = input.apply(&SymplecticTransform::phase_rotation(-angle))?;
        let v = local.mode_cov(0)[(1, 1)];
        let g_star = a * b * (v - w) / (b * b * v + a * a * w);
        let (argmin, min_db) = best.expect("sweep grid is not empty");
        let nominal = nominal_gain(t)?;
        body["gain_analysis"] = json!({
            "argmin_antisq_gain": argmin,
            "min_antisq_db": min_db,
            "nominal_gain": nominal,
            "lossless_variance_minimizing_gain": g_star,
        });
        let _ = writeln!(
            report,
            "anti-squeezed noise minimum at gain {argmin:.4}; nominal gain {nominal:.4}; lossless minimizer {g_star:.4}"
        );
    }
    files.table("table.csv", &table, json!({"format": "CSV, one row per swept value", "parameter": param.as_str()}));
    files.summary(body);
    files.out.report = report;
    Ok(())
}

fn tomography(cfg: &ExperimentConfig, files: &mut Files<'_>) -> SqzResult<()> {
    let input = cfg.input.state();
    let state = match cfg.tomography.state {
        TomographyTarget::Input => input.clone(),
        TomographyTarget::Output => {
            run_deterministic(&cfg.protocol.to_config()?, &cfg.imperfections.to_model()?, &input)?.output
        }
    };
    let s = &cfg.sampling;
    let scan = simulate_phase_scan(&state, s.n_phases, s.samples_per_phase, s.seed)?;
    let spec = GridSpec::covering(&state, cfg.tomography.grid_sigmas, cfg.tomography.grid_points)?;
    let w = reconstruct_wigner(&scan, spec, cfg.tomography.filter_cutoff)?;
    let exact = analytic_wigner(&state, spec)?;
    let moments = w.moments();
    let fitted = state_from_scan(&scan)?;
    let (m, c) = (state.mode_mean(0), state.mode_cov(0));
    let linf = w.max_abs_diff(&exact)? / exact.peak();

    let mut table = Table::new(&[
        ("phase_rad", "local-oscillator phase"),
        ("sample_mean", "mean of the homodyne samples"),
        ("sample_variance", "unbiased variance of the homodyne samples"),
        ("expected_mean", "quadrature mean of the scanned state"),
        ("expected_variance", "quadrature variance of the scanned state"),
    ]);
    for (&phi, (mean, var)) in scan.phases().iter().zip(scan.phase_statistics()) {
        table.push(vec![
            phi.into(),
            mean.into(),
            var.into(),
            state.quadrature_mean(0, phi)?.into(),
            state.marginal_variance(0, phi)?.into(),
        ]);
    }

    let window = json!({
        "x_min": spec.x_min, "x_max": spec.x_max, "p_min": spec.p_min, "p_max": spec.p_max,
        "n_x": spec.n_x, "n_p": spec.n_p,
    });
    if cfg.output.record {
        let mut buf = Vec::new();
        scan.write_csv(&mut buf)?;
        files.add(
            "record.csv",
            buf,
            json!({
                "format": "CSV with header phase_rad,sample; rows of one phase are contiguous",
                "columns": [
                    {"name": "phase_rad", "description": "local-oscillator phase"},
                    {"name": "sample", "description": "homodyne reading (vacuum variance 1/4)"},
                ],
                "metadata": scan.metadata,
            }),
        );
    }
    if cfg.output.wigner {
        let mut buf = Vec::new();
        w.write_csv(&mut buf)?;
        files.add(
            "wigner.csv",
            buf,
            json!({
                "format": "CSV matrix without header: row i is x node i, column j is p node j; nodes include both window edges",
                "window": window,
                "filter_cutoff": cfg.tomography.filter_cutoff,
            }),
        );
    }
    files.table("table.csv", &table, json!({"format": "CSV, one row per scanned phase"}));

    let summary = json!({
        "state": match cfg.tomography.state { TomographyTarget::Input => "input", TomographyTarget::Output => "output" },
        "window": window,
        "reconstruction": {
            "norm": moments.norm,
            "mean": [moments.mean_x, moments.mean_p],
            "variance": [moments.var_x, moments.var_p],
            "covariance_xp": moments.cov_xp,
            "peak": w.peak(),
            "linf_error_relative_to_peak": linf,
        },
        "exact": {
            "mean": [m[0], m[1]],
            "variance": [c[(0, 0)], c[(1, 1)]],
            "covariance_xp": c[(0, 1)],
            "peak": exact.peak(),
        },
        "variance_ratio": [moments.var_x / c[(0, 0)], moments.var_p / c[(1, 1)]],
        "fitted_moments": {
            "mean": [fitted.mode_mean(0)[0], fitted.mode_mean(0)[1]],
            "cov": [[fitted.mode_cov(0)[(0, 0)], fitted.mode_cov(0)[(0, 1)]], [fitted.mode_cov(0)[(1, 0)], fitted.mode_cov(0)[(1, 1)]]],
        },
    });
    files.summary(summary);
    files.out.report = format!(
        "reconstructed {}x{} grid from {} phases x {} samples\nnorm {:.4}, L-inf error {:.2}% of peak, variance ratios {:.4} / {:.4}\n",
        spec.n_x,
        spec.n_p,
        s.n_phases,
        s.samples_per_phase,
        moments.norm,
        100.0 * linf,
        moments.var_x / c[(0, 0)],
        moments.var_p / c[(1, 1)],
    );
    Ok(())
}

fn trajectory(cfg: &ExperimentConfig, files: &mut Files<'_>) -> SqzResult<()> {
    let input = cfg.input.state();
    let p = cfg.protocol.to_config()?;
    let model = cfg.imperfections.to_model()?;
    let s = &cfg.sampling;
    let run = run_trajectory(&p, &model, &input, s.n_shots, s.seed)?;
    let det = run_deterministic(&p, &model, &input)?.output;
    let target = squeeze_target(&input, p.transmittance, p.squeeze_angle)?;
    let boot = bootstrap_fidelity(&target, &run.batches, s.bootstrap_resamples, s.seed)?;

    if cfg.output.record {
        let mut rec = String::from("shot_index,outcome,out_mean_x,out_mean_p\n");
        for shot in &run.shots {
            let _ = writeln!(
                rec,
                "{},{},{},{}",
                shot.shot_index,
                crate::format::fmt_f64(shot.outcome),
                crate::format::fmt_f64(shot.out_mean_x),
                crate::format::fmt_f64(shot.out_mean_p)
            );
        }
        files.add(
            "record.csv",
            rec.into_bytes(),
            json!({
                "format": "CSV, one row per feedforward shot",
                "columns": [
                    {"name": "shot_index", "description": "shot number"},
                    {"name": "outcome", "description": "raw homodyne reading, electronic noise included"},
                    {"name": "out_mean_x", "description": "x mean of the conditioned, displaced output"},
                    {"name": "out_mean_p", "description": "p mean of the conditioned, displaced output"},
                ],
                "shots": run.shots.len(),
            }),
        );
    }

    let mut table = Table::new(&[
        ("batch", "batch index; each batch has its own random stream"),
        ("shots", "shots in the batch"),
        ("mean_x", "ensemble x mean"),
        ("mean_p", "ensemble p mean"),
        ("var_x", "ensemble x variance"),
        ("var_p", "ensemble p variance"),
        ("cov_xp", "ensemble x-p covariance"),
    ]);
    for (b, acc) in run.batches.iter().enumerate() {
        let (m, c) = (acc.mean(), acc.cov());
        table.push(vec![
            b.into(),
            acc.count.into(),
            m[0].into(),
            m[1].into(),
            c[(0, 0)].into(),
            c[(1, 1)].into(),
            c[(0, 1)].into(),
        ]);
    }
    files.table("table.csv", &table, json!({"format": "CSV, one row per batch"}));

    let (m, c) = (run.ensemble.mean(), run.ensemble.cov());
    let (dm, dc) = (det.mode_mean(0), det.mode_cov(0));
    let (mse, vse) = (run.ensemble.mean_standard_error(), run.ensemble.variance_standard_error());
    let z = |a: f64, b: f64, se: f64| if se > 0.0 { (a - b) / se } else { 0.0 };
    let z_scores = [
        z(m[0], dm[0], mse[0]),
        z(m[1], dm[1], mse[1]),
        z(c[(0, 0)], dc[(0, 0)], vse[0]),
        z(c[(1, 1)], dc[(1, 1)], vse[1]),
    ];
    files.summary(json!({
        "shots": run.shots.len(),
        "ensemble": {"mean": [m[0], m[1]], "variance": [c[(0, 0)], c[(1, 1)]], "covariance_xp": c[(0, 1)]},
        "deterministic": {"mean": [dm[0], dm[1]], "variance": [dc[(0, 0)], dc[(1, 1)]], "covariance_xp": dc[(0, 1)]},
        "standard_error": {"mean": [mse[0], mse[1]], "variance": [vse[0], vse[1]]},
        "z_scores": {"mean_x": z_scores[0], "mean_p": z_scores[1], "var_x": z_scores[2], "var_p": z_scores[3]},
        "fidelity": boot,
    }));
    files.out.report = format!(
        "{} shots; z-scores (mean x, mean p, var x, var p) = {:.2}, {:.2}, {:.2}, {:.2}\nfidelity {:.4} +- {:.4}\n",
        run.shots.len(),
        z_scores[0],
        z_scores[1],
        z_scores[2],
        z_scores[3],
        boot.fidelity,
        boot.std_dev,
    );
    Ok(())
}

fn compile(cfg: &ExperimentConfig, files: &mut Files<'_>) -> SqzResult<()> {
    let [[a, b], [c, d]] = cfg.compile.matrix;
    let s = Matrix2::new(a, b, c, d);
    let disp = Vector2::new(cfg.compile.displacement[0], cfg.compile.displacement[1]);
    let euler = euler_decompose(&s)?;
    let plan = plan_from_unitary(&s, &disp)?;
    plan.validate()?;
    let input = cfg.input.state();
    let ancilla_db = cfg.compile.ancilla_db.unwrap_or(cfg.protocol.ancilla_db);
    let target = input.apply(&SymplecticTransform::from_single_mode(s, disp)?)?;
    let ideal = simulate_plan(&plan, &input, f64::INFINITY)?;
    let finite = simulate_plan(&plan, &input, ancilla_db)?;
    let ideal_dev = (ideal.mean() - target.mean()).amax().max((ideal.cov() - target.cov()).amax());
    let recompose = (euler.matrix() - s).amax();
    let fidelity = fidelity_gaussian_with_tolerance(&target, &finite, f64::INFINITY)?.fidelity;

    let plan_json = serde_json::to_value(&plan)?;
    files.add(
        "plan.json",
        json_bytes(plan_json),
        json!({"format": "JSON list of gates tagged by `gate`, applied in order"}),
    );
    let mut table = Table::new(&[
        ("step", "gate position, first applied first"),
        ("gate", "rotation, squeezer or displacement"),
        ("theta", "rotation angle (rad)"),
        ("r", "squeezing parameter"),
        ("transmittance", "squeezer beam-splitter transmittance"),
        ("gain", "squeezer feedforward gain"),
        ("dx", "displacement along x"),
        ("dp", "displacement along p"),
    ]);
    for (k, g) in plan.gates.iter().enumerate() {
        use crate::compiler::Gate;
        let e = || Cell::Empty;
        let row = match *g {
            Gate::Rotation { theta } => vec![(k + 1).into(), "rotation".into(), theta.into(), e(), e(), e(), e(), e()],
            Gate::Squeezer { r, transmittance, gain } => vec![
                (k + 1).into(),
                "squeezer".into(),
                e(),
                r.into(),
                transmittance.into(),
                gain.into(),
                e(),
                e(),
            ],
            Gate::Displacement { dx, dp } => {
                vec![(k + 1).into(), "displacement".into(), e(), e(), e(), e(), dx.into(), dp.into()]
            }
        };
        table.push(row);
    }
    files.table("table.csv", &table, json!({"format": "CSV, one row per gate"}));
    files.summary(json!({
        "euler": {"theta_pre": euler.theta_pre, "r": euler.r, "theta_post": euler.theta_post},
        "recomposition_error": recompose,
        "squeezers": plan.squeezer_count(),
        "plan": plan,
        "infinite_ancilla_moment_error": ideal_dev,
        "finite_ancilla_db": ancilla_db,
        "finite_ancilla_fidelity": fidelity,
    }));
    files.out.report = format!(
        "{}infinite-ancilla moment error {:.2e}; fidelity with a {} dB ancilla {:.4}\n",
        plan.to_table(),
        ideal_dev,
        ancilla_db,
        fidelity
    );
    Ok(())
}

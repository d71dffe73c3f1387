//! The five subcommands. Each validates its flags (usage errors name the
//! offending flag and exit 2), runs the library, and emits files atomically.

use crate::output::{artifact, atomic_write, conventions, parse_matrix_json, render_matrix_json, Table};
use crate::{ChirikovArgs, ChoiArgs, CliError, CliResult, Ctx, HaarArgs, ProcessKind, QkrArgs};
use otom_core::experiments::{
    fit_plateau_stretched_exp, fit_powerlaw, moving_average, run_haar_scaling_with_progress,
    run_qkr_delta_with_progress, FitModel, HaarScalingConfig, HaarScalingRow, Observable,
    Progress, QkrDeltaConfig, SystemState,
};
use otom_core::infotheory::{cqmi, log_negativity, qmi, standard_phi_grid};
use otom_core::kicked_rotor::{
    chirikov_portrait, evolve_kicks, floquet_dense, floquet_splitstep, interior_grid, Direction,
    QkrParams,
};
use otom_core::otom::{
    build_otom_choi, compose_direct, conditional_choi, conditional_choi_analytic, contract_choi,
    otoc_direct, butterfly_instrument, ButterflyParams, ButterflyTarget, Dynamics, OtomChoi,
    ProcessSpec, WIRES,
};
use otom_core::quantum::{
    bell_state, haar_unitary, random_density, seeded_rng, DensityMatrix, Instrument, PureState,
};
use otom_core::tensor::{c, kron, ComplexMatrix, SubsystemLayout};
use serde_json::{json, Value};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn emit_progress(line: &str) {
    eprintln!("[progress] {line}");
}

fn sink(ctx: &Ctx) -> Progress<'static> {
    if ctx.progress {
        Some(&emit_progress)
    } else {
        None
    }
}

fn parse_target(token: &str) -> CliResult<ButterflyTarget> {
    if token == "probe" {
        return Ok(ButterflyTarget::Probe);
    }
    if let Some(rest) = token.strip_prefix("sysbit") {
        if let Ok(bit) = rest.parse::<usize>() {
            return Ok(ButterflyTarget::SystemQubit(bit));
        }
    }
    Err(usage(format!(
        "butterfly targets must be 'probe' or 'sysbit<b>', got {token:?}"
    )))
}

fn zero_momentum_system(dim: usize) -> CliResult<DensityMatrix> {
    let layout = SubsystemLayout::single("s", dim).map_err(CliError::from)?;
    Ok(PureState::basis(layout, 0).map_err(CliError::from)?.density())
}

// ---------------------------------------------------------------------------
// haar
// ---------------------------------------------------------------------------

pub fn cmd_haar(ctx: &Ctx, args: &HaarArgs) -> CliResult<()> {
    if args.dims.is_empty() {
        return Err(usage("--dims must list at least one dimension"));
    }
    if args.dims[0] < 1 {
        return Err(usage("--dims entries must be ≥ 1"));
    }
    if !args.dims.windows(2).all(|w| w[0] < w[1]) {
        return Err(usage("--dims must be strictly ascending"));
    }
    if args.samples < 1 {
        return Err(usage("--samples must be ≥ 1"));
    }
    let system_state = if args.mixed {
        SystemState::MaximallyMixed
    } else {
        SystemState::Pure0
    };
    let cfg = HaarScalingConfig {
        system_dims: args.dims.clone(),
        samples_per_dim: args.samples,
        seed: ctx.seed,
        phi_grid: standard_phi_grid(),
        system_state,
    };
    let rows = run_haar_scaling_with_progress(&cfg, sink(ctx))?;

    let dims_str = args
        .dims
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let meta = vec![
        ("experiment".into(), "haar-scaling".into()),
        ("seed".into(), ctx.seed.to_string()),
        ("dims".into(), dims_str),
        ("samples".into(), args.samples.to_string()),
        (
            "system_state".into(),
            if args.mixed { "maximally_mixed" } else { "pure0" }.into(),
        ),
        ("phi_grid".into(), "0..pi/2 in 9 steps".into()),
    ];
    let table = Table {
        meta: meta.clone(),
        columns: vec!["N", "observable", "mean", "stderr", "samples"],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.system_dim.to_string(),
                    r.observable.label().to_string(),
                    r.mean.to_string(),
                    r.stderr.to_string(),
                    r.samples.to_string(),
                ]
            })
            .collect(),
    };
    let path = table.write(&ctx.out_dir, "haar_scaling", ctx.format)?;
    println!("wrote {}", path.display());

    let fits_doc = json!({
        "metadata": {
            "artifact": artifact(),
            "parameters": Value::Object(
                meta.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect()
            ),
            "conventions": conventions(),
        },
        "fits": {
            "i_ai_bo_powerlaw": fit_to_value(fit_series(&rows, &cfg.system_dims, Observable::IAiBo, Fit::PowerLaw)),
            "delta_plateau": fit_to_value(fit_series(&rows, &cfg.system_dims, Observable::Delta, Fit::Plateau)),
        },
    });
    let fits_path = ctx.out_dir.join("haar_fits.json");
    let mut text = serde_json::to_string_pretty(&fits_doc).expect("static structure");
    text.push('\n');
    atomic_write(&fits_path, &text)?;
    println!("wrote {}", fits_path.display());
    Ok(())
}

enum Fit {
    PowerLaw,
    Plateau,
}

fn fit_series(
    rows: &[HaarScalingRow],
    dims: &[usize],
    obs: Observable,
    kind: Fit,
) -> otom_core::Result<otom_core::experiments::FitResult> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &n in dims {
        let row = rows
            .iter()
            .find(|r| r.system_dim == n && r.observable == obs)
            .expect("one row per (dim, observable)");
        xs.push(n as f64);
        ys.push(row.mean);
    }
    match kind {
        Fit::PowerLaw => fit_powerlaw(&xs, &ys),
        Fit::Plateau => fit_plateau_stretched_exp(&xs, &ys),
    }
}

fn fit_to_value(fit: otom_core::Result<otom_core::experiments::FitResult>) -> Value {
    match fit {
        Ok(f) => serde_json::to_value(f).expect("fit serializes"),
        Err(e) => json!({ "skipped": e.to_string() }),
    }
}

// ---------------------------------------------------------------------------
// qkr
// ---------------------------------------------------------------------------

pub fn cmd_qkr(ctx: &Ctx, args: &QkrArgs) -> CliResult<()> {
    if args.k.is_empty() {
        return Err(usage("--k must list at least one kick strength"));
    }
    if args.kicks < 1 {
        return Err(usage("--kicks must be ≥ 1"));
    }
    if args.dim < 8 || !args.dim.is_multiple_of(2) {
        return Err(usage("--dim must be an even integer ≥ 8"));
    }
    if args.v.len() != 3 {
        return Err(usage("--v needs exactly three comma-separated values"));
    }
    if args.window.is_multiple_of(2) || args.window == 0 {
        return Err(usage("--window must be an odd integer ≥ 1"));
    }
    if args.window > args.kicks {
        return Err(usage("--window must not exceed --kicks"));
    }
    if args.targets.is_empty() {
        return Err(usage("--targets must list at least one target"));
    }
    let targets: Vec<ButterflyTarget> = args
        .targets
        .iter()
        .map(|t| parse_target(t))
        .collect::<CliResult<_>>()?;
    for target in &targets {
        if let ButterflyTarget::SystemQubit(b) = target {
            if !args.dim.is_power_of_two() || (1usize << (b + 1)) > args.dim {
                return Err(usage(format!(
                    "--targets sysbit{b} requires --dim to be a power of two with 2^{} ≤ dim",
                    b + 1
                )));
            }
        }
    }
    for (i, a) in targets.iter().enumerate() {
        if targets[..i].contains(a) {
            return Err(usage(format!("duplicate --targets entry {:?}", a.label())));
        }
    }

    for &k in &args.k {
        let cfg = QkrDeltaConfig {
            params: QkrParams {
                k,
                hbar_eff: args.hbar,
                n_trunc: args.dim / 2,
                v1: args.v[0],
                v2: args.v[1],
                v3: args.v[2],
            },
            kicks_max: args.kicks,
            targets: targets.clone(),
            phi_grid: standard_phi_grid(),
            smoothing_window: args.window,
        };
        let rows = run_qkr_delta_with_progress(&cfg, sink(ctx))?;
        for target in &targets {
            let meta = vec![
                ("experiment".into(), "qkr-delta".into()),
                ("k".into(), k.to_string()),
                ("dim".into(), args.dim.to_string()),
                ("hbar_eff".into(), args.hbar.to_string()),
                (
                    "v".into(),
                    format!("{},{},{}", args.v[0], args.v[1], args.v[2]),
                ),
                ("kicks".into(), args.kicks.to_string()),
                ("window".into(), args.window.to_string()),
                ("target".into(), target.label()),
                ("system_state".into(), "|m=0>".into()),
            ];
            let table = Table {
                meta,
                columns: vec!["t", "delta_raw", "delta_smoothed"],
                rows: rows
                    .iter()
                    .filter(|r| r.target == *target)
                    .map(|r| {
                        vec![
                            r.kicks.to_string(),
                            r.delta_raw.to_string(),
                            r.delta_smoothed.to_string(),
                        ]
                    })
                    .collect(),
            };
            let stem = format!("qkr_delta_k{}_{}", k, target.label());
            let path = table.write(&ctx.out_dir, &stem, ctx.format)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// chirikov
// ---------------------------------------------------------------------------

fn parse_grid(token: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = token.split('x').collect();
    if parts.len() == 2 {
        if let (Ok(a), Ok(b)) = (parts[0].parse::<usize>(), parts[1].parse::<usize>()) {
            if a >= 1 && b >= 1 {
                return Ok((a, b));
            }
        }
    }
    Err(usage(format!(
        "--grid must look like 16x16 (theta-count x p-count), got {token:?}"
    )))
}

pub fn cmd_chirikov(ctx: &Ctx, args: &ChirikovArgs) -> CliResult<()> {
    if args.k.is_empty() {
        return Err(usage("--k must list at least one kick strength"));
    }
    if args.iters < 1 {
        return Err(usage("--iters must be ≥ 1"));
    }
    let (n_theta, n_p) = parse_grid(&args.grid)?;
    for &k in &args.k {
        let seeds = interior_grid(n_theta, n_p);
        let orbits = chirikov_portrait(k, &seeds, args.iters)?;
        let mut rows = Vec::with_capacity(orbits.len() * args.iters);
        for (orbit_id, orbit) in orbits.iter().enumerate() {
            for (i, state) in orbit.iter().enumerate() {
                rows.push(vec![
                    orbit_id.to_string(),
                    (i + 1).to_string(),
                    state.theta.to_string(),
                    state.p.to_string(),
                ]);
            }
            if ctx.progress {
                emit_progress(&format!(
                    "chirikov k={k} orbit {}/{}",
                    orbit_id + 1,
                    orbits.len()
                ));
            }
        }
        let meta = vec![
            ("experiment".into(), "chirikov".into()),
            ("k".into(), k.to_string()),
            ("grid".into(), format!("{n_theta}x{n_p}")),
            ("iters".into(), args.iters.to_string()),
        ];
        let table = Table {
            meta,
            columns: vec!["orbit_id", "n", "theta", "p"],
            rows,
        };
        let stem = format!("chirikov_k{k}");
        let path = table.write(&ctx.out_dir, &stem, ctx.format)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// choi
// ---------------------------------------------------------------------------

pub fn cmd_choi(ctx: &Ctx, args: &ChoiArgs) -> CliResult<()> {
    if let Some(path) = &args.validate {
        return validate_matrix_file(path);
    }
    let target = parse_target(&args.target)?;
    let (process, process_meta) = build_choi_process(ctx, args, target)?;
    let (kind, wires, mat) = match args.phi {
        Some(phi) => {
            let cond = conditional_choi_analytic(&process, phi)?;
            ("conditional_choi", vec!["a_i", "c_o"], cond.into_matrix())
        }
        None => {
            let choi = build_otom_choi(&process)?;
            (
                "otom_choi",
                WIRES.to_vec(),
                choi.state().matrix().clone(),
            )
        }
    };
    let dims: Vec<usize> = match kind {
        "conditional_choi" => vec![process.probe_dim, process.probe_dim],
        _ => vec![
            process.probe_dim,
            process.target_dim(),
            process.target_dim(),
            process.probe_dim,
        ],
    };
    let mut metadata = json!({
        "artifact": artifact(),
        "kind": kind,
        "wires": wires,
        "dims": dims,
        "process": process_meta,
        "conventions": conventions(),
    });
    if let Some(phi) = args.phi {
        metadata["phi"] = json!(phi);
    }
    let name = args.out.clone().unwrap_or_else(|| format!("{kind}.json"));
    let path = ctx.out_dir.join(name);
    atomic_write(&path, &render_matrix_json(&metadata, &mat))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn build_choi_process(
    ctx: &Ctx,
    args: &ChoiArgs,
    target: ButterflyTarget,
) -> CliResult<(ProcessSpec, Value)> {
    let check_sysbit = |system_dim: usize| -> CliResult<()> {
        if let ButterflyTarget::SystemQubit(b) = target {
            if !system_dim.is_power_of_two() || (1usize << (b + 1)) > system_dim {
                return Err(usage(format!(
                    "--target sysbit{b} needs a power-of-two system dimension with 2^{} ≤ dim",
                    b + 1
                )));
            }
        }
        Ok(())
    };
    match args.process {
        ProcessKind::Identity | ProcessKind::Haar => {
            if args.system_dim < 1 {
                return Err(usage("--system-dim must be ≥ 1"));
            }
            check_sysbit(args.system_dim)?;
            let (forward, meta) = match args.process {
                ProcessKind::Identity => (
                    Dynamics::Unitary(ComplexMatrix::identity(2 * args.system_dim)),
                    json!({ "kind": "identity", "system_dim": args.system_dim }),
                ),
                _ => {
                    let mut rng = seeded_rng(ctx.seed);
                    (
                        Dynamics::Unitary(haar_unitary(2 * args.system_dim, &mut rng)),
                        json!({ "kind": "haar", "system_dim": args.system_dim, "seed": ctx.seed }),
                    )
                }
            };
            let process = ProcessSpec {
                forward,
                rho_s: zero_momentum_system(args.system_dim)?,
                probe_dim: 2,
                target,
            };
            Ok((process, meta))
        }
        ProcessKind::Qkr => {
            if args.dim < 8 || !args.dim.is_multiple_of(2) {
                return Err(usage("--dim must be an even integer ≥ 8"));
            }
            if args.v.len() != 3 {
                return Err(usage("--v needs exactly three comma-separated values"));
            }
            check_sysbit(args.dim)?;
            let params = QkrParams {
                k: args.k,
                hbar_eff: args.hbar,
                n_trunc: args.dim / 2,
                v1: args.v[0],
                v2: args.v[1],
                v3: args.v[2],
            };
            let floquet = floquet_splitstep(&params)?;
            let process = ProcessSpec {
                forward: Dynamics::Kicked {
                    floquet,
                    kicks: args.kicks,
                },
                rho_s: zero_momentum_system(args.dim)?,
                probe_dim: 2,
                target,
            };
            let meta = json!({
                "kind": "qkr",
                "dim": args.dim,
                "k": args.k,
                "hbar_eff": args.hbar,
                "v": args.v,
                "kicks": args.kicks,
                "system_state": "|m=0>",
            });
            Ok((process, meta))
        }
    }
}

fn validate_matrix_file(path: &std::path::Path) -> CliResult<()> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let (metadata, mat) = parse_matrix_json(&text)?;
    let wires: Vec<String> = metadata
        .get("wires")
        .and_then(Value::as_array)
        .map(|ws| {
            ws.iter()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect()
        })
        .ok_or_else(|| CliError::Runtime("metadata lacks a \"wires\" list".into()))?;
    let dims: Vec<usize> = metadata
        .get("dims")
        .and_then(Value::as_array)
        .map(|ds| {
            ds.iter()
                .filter_map(Value::as_u64)
                .map(|d| d as usize)
                .collect()
        })
        .ok_or_else(|| CliError::Runtime("metadata lacks a \"dims\" list".into()))?;
    if wires.len() != dims.len() || wires.is_empty() {
        return Err(CliError::Runtime(
            "wires and dims must be equal-length and non-empty".into(),
        ));
    }
    if dims.iter().product::<usize>() != mat.rows {
        return Err(CliError::Runtime(format!(
            "dims {:?} do not match a {}x{} matrix",
            dims, mat.rows, mat.cols
        )));
    }
    let pairs: Vec<(&str, usize)> = wires
        .iter()
        .map(String::as_str)
        .zip(dims.iter().copied())
        .collect();
    let layout = SubsystemLayout::new(&pairs)?;
    let state = DensityMatrix::new(mat, layout)
        .map_err(|e| CliError::Runtime(format!("matrix failed state validation: {e}")))?;
    if wires == WIRES {
        OtomChoi::new(state)
            .map_err(|e| CliError::Runtime(format!("matrix failed wire validation: {e}")))?;
    }
    println!(
        "valid: hermitian, positive, unit trace; wires [{}]",
        wires.join(", ")
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

type Check = (&'static str, fn() -> Result<(), String>);

pub fn cmd_selftest() -> CliResult<()> {
    let checks: [Check; 12] = [
        ("bell_pair_information", check_bell),
        ("werner_log_negativity", check_werner),
        ("ghz_conditional_information", check_ghz),
        ("strong_subadditivity", check_ssa),
        ("haar_unitarity", check_haar_unitary),
        ("otoc_composition_contraction", check_otoc_triple),
        ("choi_validity_and_marginal", check_choi_marginal),
        ("conditional_identity_channel", check_conditional_identity),
        ("butterfly_dagger_convention", check_dagger),
        ("splitstep_vs_dense_floquet", check_splitstep),
        ("chirikov_momentum_conservation", check_chirikov),
        ("smoothing_and_fits", check_fits),
    ];
    let mut failed = 0usize;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("ok {name}"),
            Err(msg) => {
                println!("FAIL {name}: {msg}");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} self-checks failed")));
    }
    println!("selftest: 12 checks passed");
    Ok(())
}

fn ensure(cond: bool, msg: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

fn check_bell() -> Result<(), String> {
    let rho = bell_state("x", "y", 2).map_err(|e| e.to_string())?.density();
    let i = qmi(&rho, &["x"], &["y"]).map_err(|e| e.to_string())?;
    let e = log_negativity(&rho, &["y"]).map_err(|e| e.to_string())?;
    ensure((i - 2.0).abs() < 1e-12, "I(x:y) of a Bell pair must be 2 bits")?;
    ensure((e - 1.0).abs() < 1e-12, "log-negativity of a Bell pair must be 1")
}

fn check_werner() -> Result<(), String> {
    let s = 1.0 / 2.0f64.sqrt();
    let layout = SubsystemLayout::new(&[("x", 2), ("y", 2)]).map_err(|e| e.to_string())?;
    let psim = PureState::new(
        vec![c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)],
        layout.clone(),
    )
    .map_err(|e| e.to_string())?;
    let mut m = psim.density().into_matrix().scale(c(0.5, 0.0));
    m.add_assign_scaled(&ComplexMatrix::identity(4), c(0.125, 0.0));
    let rho = DensityMatrix::new(m, layout).map_err(|e| e.to_string())?;
    let e = log_negativity(&rho, &["y"]).map_err(|e| e.to_string())?;
    ensure(
        (e - 1.25f64.log2()).abs() < 1e-12,
        "Werner(p=1/2) log-negativity must be log2(5/4)",
    )
}

fn check_ghz() -> Result<(), String> {
    let layout =
        SubsystemLayout::new(&[("x", 2), ("y", 2), ("z", 2)]).map_err(|e| e.to_string())?;
    let s = 1.0 / 2.0f64.sqrt();
    let mut amps = vec![c(0.0, 0.0); 8];
    amps[0] = c(s, 0.0);
    amps[7] = c(s, 0.0);
    let rho = PureState::new(amps, layout)
        .map_err(|e| e.to_string())?
        .density();
    let v = cqmi(&rho, &["x"], &["y"], &["z"]).map_err(|e| e.to_string())?;
    ensure((v - 1.0).abs() < 1e-10, "GHZ I(x:y|z) must be 1 bit")
}

fn check_ssa() -> Result<(), String> {
    let mut rng = seeded_rng(11);
    let layout =
        SubsystemLayout::new(&[("x", 2), ("y", 2), ("z", 2)]).map_err(|e| e.to_string())?;
    for _ in 0..50 {
        let m = random_density(8, &mut rng).into_matrix();
        let rho = DensityMatrix::new(m, layout.clone()).map_err(|e| e.to_string())?;
        let v = cqmi(&rho, &["x"], &["y"], &["z"]).map_err(|e| e.to_string())?;
        ensure(v >= -1e-9, "strong subadditivity violated")?;
    }
    Ok(())
}

fn check_haar_unitary() -> Result<(), String> {
    let mut rng = seeded_rng(5);
    let u = haar_unitary(16, &mut rng);
    ensure(
        u.unitarity_defect() < 1e-12,
        "Haar sample is not unitary to 1e-12",
    )
}

fn check_otoc_triple() -> Result<(), String> {
    let mut rng = seeded_rng(17);
    for _ in 0..3 {
        let ds = 3;
        let u = haar_unitary(2 * ds, &mut rng);
        let vp = haar_unitary(2, &mut rng);
        let wp = haar_unitary(2, &mut rng);
        let rho_s = random_density(ds, &mut rng);
        let process = ProcessSpec {
            forward: Dynamics::Unitary(u.clone()),
            rho_s: rho_s.clone(),
            probe_dim: 2,
            target: ButterflyTarget::Probe,
        };
        let joint = kron(
            &ComplexMatrix::identity(2).scale(c(0.5, 0.0)),
            rho_s.matrix(),
        );
        let layout = SubsystemLayout::new(&[("p", 2), ("s", ds)]).map_err(|e| e.to_string())?;
        let rho = DensityMatrix::new_unchecked(joint, layout);
        let v = kron(&vp, &ComplexMatrix::identity(ds));
        let w = kron(&wp, &ComplexMatrix::identity(ds));
        let f_direct = otoc_direct(&u, &rho, &v, &w).map_err(|e| e.to_string())?;
        let eye = ComplexMatrix::identity(2);
        let a = Instrument::new(vec![(vp.dagger(), eye.clone())]).map_err(|e| e.to_string())?;
        let b = Instrument::new(vec![(wp.dagger(), wp.dagger())]).map_err(|e| e.to_string())?;
        let c_inst = Instrument::new(vec![(eye, vp.dagger())]).map_err(|e| e.to_string())?;
        let f_composed = compose_direct(&process, &a, &b, &c_inst).map_err(|e| e.to_string())?;
        let choi = build_otom_choi(&process).map_err(|e| e.to_string())?;
        let f_contracted = contract_choi(&choi, &a, &b, &c_inst).map_err(|e| e.to_string())?;
        ensure(
            (f_direct - f_composed).norm() < 1e-10,
            "otoc_direct disagrees with compose_direct",
        )?;
        ensure(
            (f_direct - f_contracted).norm() < 1e-10,
            "otoc_direct disagrees with contract_choi",
        )?;
    }
    Ok(())
}

fn check_choi_marginal() -> Result<(), String> {
    let mut rng = seeded_rng(23);
    let process = ProcessSpec {
        forward: Dynamics::Unitary(haar_unitary(6, &mut rng)),
        rho_s: random_density(3, &mut rng),
        probe_dim: 2,
        target: ButterflyTarget::Probe,
    };
    let choi = build_otom_choi(&process).map_err(|e| e.to_string())?;
    let state = choi.state();
    ensure(
        (state.matrix().trace() - c(1.0, 0.0)).norm() < 1e-10,
        "Choi trace must be 1",
    )?;
    let eig = state.eigenvalues().map_err(|e| e.to_string())?;
    ensure(eig[0] >= -1e-10, "Choi must be positive semidefinite")?;
    let ai = state.marginal(&["a_i"]).map_err(|e| e.to_string())?;
    let half = ComplexMatrix::identity(2).scale(c(0.5, 0.0));
    ensure(
        ai.matrix().max_abs_diff(&half) < 1e-12,
        "a_i marginal must be maximally mixed",
    )
}

fn check_conditional_identity() -> Result<(), String> {
    let mut rng = seeded_rng(29);
    let process = ProcessSpec {
        forward: Dynamics::Unitary(haar_unitary(6, &mut rng)),
        rho_s: random_density(3, &mut rng),
        probe_dim: 2,
        target: ButterflyTarget::Probe,
    };
    let cond = conditional_choi_analytic(&process, 0.0).map_err(|e| e.to_string())?;
    let want = bell_state("a_i", "c_o", 2)
        .map_err(|e| e.to_string())?
        .density()
        .into_matrix();
    ensure(
        cond.matrix().max_abs_diff(&want) < 1e-10,
        "phi = 0 conditional must be the maximally entangled state",
    )
}

fn check_dagger() -> Result<(), String> {
    let mut rng = seeded_rng(31);
    let process = ProcessSpec {
        forward: Dynamics::Unitary(haar_unitary(6, &mut rng)),
        rho_s: random_density(3, &mut rng),
        probe_dim: 2,
        target: ButterflyTarget::Probe,
    };
    let choi = build_otom_choi(&process).map_err(|e| e.to_string())?;
    let phi = 0.4;
    let b = butterfly_instrument(&ButterflyParams {
        phi,
        target: process.target,
    });
    let contracted = conditional_choi(&choi, &b).map_err(|e| e.to_string())?;
    let analytic = conditional_choi_analytic(&process, phi).map_err(|e| e.to_string())?;
    ensure(
        contracted.state.matrix().max_abs_diff(analytic.matrix()) < 1e-10,
        "contraction and analytic conditional paths disagree",
    )
}

fn check_splitstep() -> Result<(), String> {
    let params = QkrParams {
        k: 5.0,
        n_trunc: 8,
        ..Default::default()
    };
    let f = floquet_splitstep(&params).map_err(|e| e.to_string())?;
    let u = floquet_dense(&params).map_err(|e| e.to_string())?;
    let layout = SubsystemLayout::new(&[("s", params.dim_rotor()), ("p", 2)])
        .map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(37);
    for _ in 0..3 {
        let g = random_density(params.dim_total(), &mut rng);
        let amps: Vec<_> = (0..params.dim_total()).map(|r| g.matrix().at(r, 0)).collect();
        let mut st = PureState::new(amps, layout.clone()).map_err(|e| e.to_string())?;
        st.normalize();
        let mut via_split = st.clone();
        evolve_kicks(&mut via_split, &f, 1, Direction::Forward, "s", "p")
            .map_err(|e| e.to_string())?;
        let dense = u.apply_to_vec(&st.amps);
        let diff = via_split
            .amps
            .iter()
            .zip(&dense)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        ensure(diff < 1e-8, "split-step and dense Floquet disagree")?;
    }
    Ok(())
}

fn check_chirikov() -> Result<(), String> {
    let seeds = interior_grid(3, 3);
    let orbits = chirikov_portrait(0.0, &seeds, 50).map_err(|e| e.to_string())?;
    for orbit in &orbits {
        let p0 = orbit[0].p;
        for s in orbit {
            ensure((s.p - p0).abs() < 1e-12, "k = 0 must conserve momentum")?;
        }
    }
    Ok(())
}

fn check_fits() -> Result<(), String> {
    let got = moving_average(&[0.0, 1.0, 0.0, 1.0, 0.0], 3).map_err(|e| e.to_string())?;
    let want = [0.5, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 0.5];
    for (g, w) in got.iter().zip(want) {
        ensure((g - w).abs() < 1e-15, "moving-average edge rule is off")?;
    }
    let xs = [2.0f64, 4.0, 8.0, 16.0];
    let ys: Vec<f64> = xs.iter().map(|&x| 0.02 * x.powf(-0.95)).collect();
    let fit = fit_powerlaw(&xs, &ys).map_err(|e| e.to_string())?;
    let FitModel::PowerLaw { alpha, beta } = fit.model else {
        return Err("power-law fit returned the wrong model".into());
    };
    ensure(
        (alpha - 0.02).abs() < 1e-10 && (beta - 0.95).abs() < 1e-10,
        "power-law fit failed exact recovery",
    )?;
    let xs: Vec<f64> = (1..=10).map(|k| k as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 0.5 + (-0.3 * x.powf(0.6)).exp()).collect();
    let fit = fit_plateau_stretched_exp(&xs, &ys).map_err(|e| e.to_string())?;
    let FitModel::PlateauStretchedExp { xi, gamma, .. } = fit.model else {
        return Err("plateau fit returned the wrong model".into());
    };
    ensure(
        (xi - 0.5).abs() < 1e-5 && (gamma - 0.3).abs() < 1e-5,
        "plateau fit failed exact recovery",
    )
}

//! Subcommand implementations. Every command echoes the resolved
//! configuration, writes CSV or a key=value report, and prints a one-line
//! summary. Output bytes depend only on the configuration and seed.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::{
    BuildupArgs, ContrastArgs, FieldArgs, FitArgs, FitModelKind, LevelsArgs, RelaxArgs,
    SlopesArgs, SpectrumArgs, VolumeArgs,
};
use oipd_core::dipolar::{
    detection_volume, fluctuation_halfspace, integrate_numeric, mean_field_cylinder,
    mean_field_sphere, Geometry, IntegralKind, QuadratureOptions,
};
use oipd_core::fitting::{
    fit_depth_profile, fit_exponential, fit_field_dependence, fit_lorentzian,
    propagate_uncertainty, Dataset, DepthProfileModel, FieldPoint, FitResult, NuisanceWidths,
};
use oipd_core::kinetics::{
    buildup_curve, relaxation_experiment, spectrum, Mw1Line, RelaxChannel,
};
use oipd_core::signal::{contrast_vs_depth, crossover_depth, sc_polarization};
use oipd_core::spinham::{field_sweep, local_slope, transition_frequencies, Branch};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn echo_config(config: &RunConfig) {
    println!("# resolved configuration");
    for line in config.echo().lines() {
        println!("# {line}");
    }
}

fn quad_options(config: &RunConfig) -> QuadratureOptions {
    QuadratureOptions {
        rel_tol: config.io.rel_tol,
        exclusion_nm: config.io.exclusion_nm,
        ..QuadratureOptions::default()
    }
}

/// The 0 <-> +1 resonance of the configured triplet.
fn resonance(config: &RunConfig) -> Result<f64, CliError> {
    let (plus, _) = transition_frequencies(&config.triplet.to_params())?;
    Ok(plus)
}

fn mw1_line(config: &RunConfig) -> Result<Mw1Line, CliError> {
    Ok(Mw1Line {
        center_mhz: resonance(config)?,
        fwhm_mhz: config.sequence.mw1_fwhm_mhz,
    })
}

pub fn run_levels(config: &RunConfig, args: &LevelsArgs) -> Result<(), CliError> {
    echo_config(config);
    let rows = field_sweep(
        &config.triplet.to_params(),
        args.b_start,
        args.b_end,
        args.points,
    )?;
    let mut csv = String::from("B0_G,E_plus_MHz,E_0_MHz,E_minus_MHz,omega_plus_MHz,omega_minus_MHz\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.b0_gauss, r.e_plus_mhz, r.e_zero_mhz, r.e_minus_mhz, r.omega_plus_mhz, r.omega_minus_mhz
        )
        .unwrap();
    }
    write_output(&args.output, &csv)?;
    println!(
        "levels: {} field points in [{}, {}] G -> {}",
        rows.len(),
        args.b_start,
        args.b_end,
        args.output.display()
    );
    Ok(())
}

pub fn run_slopes(config: &RunConfig, args: &SlopesArgs) -> Result<(), CliError> {
    echo_config(config);
    let p = config.triplet.to_params().with_field(args.b0);
    let plus = local_slope(&p, Branch::Plus, args.db)?;
    let minus = local_slope(&p, Branch::Minus, args.db)?;
    let (omega_plus, omega_minus) = transition_frequencies(&p)?;
    let mut report = String::new();
    writeln!(report, "b0_gauss = {}", args.b0).unwrap();
    writeln!(report, "omega_plus_mhz = {omega_plus}").unwrap();
    writeln!(report, "omega_minus_mhz = {omega_minus}").unwrap();
    writeln!(report, "slope_plus_mhz_per_g = {plus}").unwrap();
    writeln!(report, "slope_minus_mhz_per_g = {minus}").unwrap();
    if let Some(path) = &args.output {
        write_output(path, &report)?;
    }
    println!(
        "slopes at {} G: d(omega+)/dB = {plus:.4} MHz/G, d(omega-)/dB = {minus:.4} MHz/G",
        args.b0
    );
    Ok(())
}

pub fn run_field(config: &RunConfig, args: &FieldArgs) -> Result<(), CliError> {
    echo_config(config);
    let s = config.sample.to_spec()?;
    let opts = quad_options(config);
    let mut csv = String::from("parameter,estimate,error_bound\n");
    let mut summary = Vec::new();

    match s.geometry {
        Geometry::Sphere { .. } => {
            let closed = mean_field_sphere(&s)?;
            writeln!(csv, "mean_B_gauss_closed,{closed},0").unwrap();
            summary.push(format!("mean B = {closed:.6e} G"));
        }
        Geometry::Cylinder { .. } => {
            let closed = mean_field_cylinder(&s)?;
            writeln!(csv, "mean_B_gauss_closed,{closed},0").unwrap();
            summary.push(format!("mean B = {closed:.6e} G"));
        }
        Geometry::HalfSpace { .. } => {
            let var = fluctuation_halfspace(&s)?;
            writeln!(csv, "var_B_gauss2_closed,{var},0").unwrap();
            summary.push(format!("var B = {var:.6e} G^2"));
        }
    }
    if args.numeric {
        let mean = integrate_numeric(&s, IntegralKind::Mean, &opts)?;
        writeln!(csv, "mean_B_gauss_numeric,{},{}", mean.value, mean.error_bound).unwrap();
        let var = integrate_numeric(&s, IntegralKind::Variance, &opts)?;
        writeln!(csv, "var_B_gauss2_numeric,{},{}", var.value, var.error_bound).unwrap();
        summary.push(format!(
            "numeric mean = {:.6e} G, numeric var = {:.6e} G^2",
            mean.value, var.value
        ));
    }
    if let Some(path) = &args.output {
        write_output(path, &csv)?;
    }
    println!("field: {}", summary.join("; "));
    Ok(())
}

pub fn run_volume(config: &RunConfig, args: &VolumeArgs) -> Result<(), CliError> {
    echo_config(config);
    let s = config.sample.to_spec()?;
    let opts = quad_options(config);
    let r_p = detection_volume(&s, IntegralKind::Mean, args.fraction, &opts)?;
    let r_f = detection_volume(&s, IntegralKind::Variance, args.fraction, &opts)?;
    let mut report = String::new();
    writeln!(report, "fraction = {}", args.fraction).unwrap();
    writeln!(report, "r_p_um = {r_p}").unwrap();
    writeln!(report, "r_f_um = {r_f}").unwrap();
    writeln!(report, "ratio = {}", r_p / r_f).unwrap();
    if let Some(path) = &args.output {
        write_output(path, &report)?;
    }
    println!(
        "volume: r_p = {r_p:.4} um, r_f = {r_f:.4} um, ratio = {:.3}",
        r_p / r_f
    );
    Ok(())
}

fn log_spaced(start: f64, end: f64, n: usize) -> Vec<f64> {
    let (a, b) = (start.ln(), end.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}

pub fn run_contrast(config: &RunConfig, args: &ContrastArgs) -> Result<(), CliError> {
    echo_config(config);
    let s = config.sample.to_spec()?;
    let m = config.contrast.to_model()?;
    let p_list: Vec<f64> = args
        .p_list
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("`p_list`: `{tok}` is not a number")))
        })
        .collect::<Result<_, _>>()?;
    let depths = log_spaced(args.d_start, args.d_end, args.points);
    let table = contrast_vs_depth(&s, &m, &depths, &p_list)?;

    let mut csv = String::from("depth_um");
    for p in &p_list {
        write!(csv, ",SC_pola_P{p}").unwrap();
    }
    csv.push_str(",SC_fluc\n");
    for row in &table {
        write!(csv, "{}", row.depth_um).unwrap();
        for v in &row.sc_pola {
            write!(csv, ",{v}").unwrap();
        }
        writeln!(csv, ",{}", row.sc_fluc).unwrap();
    }
    write_output(&args.output, &csv)?;

    let mut summary = format!(
        "contrast: {} depths in [{}, {}] um -> {}",
        depths.len(),
        args.d_start,
        args.d_end,
        args.output.display()
    );
    for &p in &p_list {
        match crossover_depth(&s, &m, p) {
            Ok(d) => write!(summary, "; crossover(P={p}) = {d:.4} um").unwrap(),
            Err(_) => write!(summary, "; crossover(P={p}) not in range").unwrap(),
        }
    }
    println!("{summary}");
    Ok(())
}

pub fn run_spectrum(config: &RunConfig, args: &SpectrumArgs) -> Result<(), CliError> {
    echo_config(config);
    let s = config.sample.to_spec()?;
    let k = config.kinetics.to_params()?;
    let m = config.contrast.to_model()?;
    let line = mw1_line(config)?;
    let seq = config.sequence.to_spec(line.center_mhz)?;
    let center = line.center_mhz;
    let f_start = args.f_start.unwrap_or(center - 100.0);
    let f_end = args.f_end.unwrap_or(center + 100.0);
    let sweep: Vec<f64> = (0..args.points)
        .map(|i| f_start + (f_end - f_start) * i as f64 / (args.points - 1).max(1) as f64)
        .collect();
    let points = spectrum(
        &seq,
        &s,
        &k,
        &m,
        &line,
        &sweep,
        args.noise_sigma,
        config.io.seed,
    )?;
    let mut csv = String::new();
    if args.noise_sigma > 0.0 {
        csv.push_str("frequency_MHz,SC,sigma\n");
        for p in &points {
            writeln!(csv, "{},{},{}", p.frequency_mhz, p.sc, args.noise_sigma).unwrap();
        }
    } else {
        csv.push_str("frequency_MHz,SC\n");
        for p in &points {
            writeln!(csv, "{},{}", p.frequency_mhz, p.sc).unwrap();
        }
    }
    write_output(&args.output, &csv)?;
    println!(
        "spectrum: {} points in [{f_start}, {f_end}] MHz (resonance {center:.3} MHz) -> {}",
        points.len(),
        args.output.display()
    );
    Ok(())
}

pub fn run_relax(config: &RunConfig, args: &RelaxArgs) -> Result<(), CliError> {
    echo_config(config);
    let s = config.sample.to_spec()?;
    let k = config.kinetics.to_params()?;
    let m = config.contrast.to_model()?;
    let line = mw1_line(config)?;
    let seq = config.sequence.to_spec(line.center_mhz)?;
    let channel = match args.channel.as_str() {
        "plus" => RelaxChannel::Plus,
        "zero" => RelaxChannel::Zero,
        other => {
            return Err(CliError::Validation(format!(
                "`channel`: unknown value `{other}` (expected plus or zero)"
            )))
        }
    };
    let taus: Vec<f64> = (0..args.points)
        .map(|i| {
            args.tau_start + (args.tau_end - args.tau_start) * i as f64 / (args.points - 1).max(1) as f64
        })
        .collect();
    let pts = relaxation_experiment(
        channel,
        &taus,
        &seq,
        &s,
        &k,
        &m,
        &line,
        args.noise_sigma,
        config.io.seed,
    )?;
    let mut csv = String::new();
    if args.noise_sigma > 0.0 {
        csv.push_str("tau_rel_us,amplitude,sigma\n");
        for p in &pts {
            writeln!(csv, "{},{},{}", p.tau_rel_us, p.amplitude, args.noise_sigma).unwrap();
        }
    } else {
        csv.push_str("tau_rel_us,amplitude\n");
        for p in &pts {
            writeln!(csv, "{},{}", p.tau_rel_us, p.amplitude).unwrap();
        }
    }
    write_output(&args.output, &csv)?;
    println!(
        "relax ({}): {} intervals in [{}, {}] us -> {}",
        args.channel,
        pts.len(),
        args.tau_start,
        args.tau_end,
        args.output.display()
    );
    Ok(())
}

pub fn run_buildup(config: &RunConfig, args: &BuildupArgs) -> Result<(), CliError> {
    echo_config(config);
    let s = config.sample.to_spec()?;
    let k = config.kinetics.to_params()?;
    let m = config.contrast.to_model()?;
    let line = mw1_line(config)?;
    let seq = config.sequence.to_spec(line.center_mhz)?;
    let taus: Vec<f64> = (0..args.points)
        .map(|i| {
            args.tau_p_start
                + (args.tau_p_end - args.tau_p_start) * i as f64 / (args.points - 1).max(1) as f64
        })
        .collect();
    let pts = buildup_curve(
        &taus,
        &seq,
        &s,
        &k,
        &m,
        &line,
        args.noise_sigma,
        config.io.seed,
    )?;
    let mut csv = String::new();
    if args.noise_sigma > 0.0 {
        csv.push_str("tau_p_us,amplitude,sigma\n");
        for p in &pts {
            writeln!(csv, "{},{},{}", p.tau_p_us, p.amplitude, args.noise_sigma).unwrap();
        }
    } else {
        csv.push_str("tau_p_us,amplitude\n");
        for p in &pts {
            writeln!(csv, "{},{}", p.tau_p_us, p.amplitude).unwrap();
        }
    }
    write_output(&args.output, &csv)?;
    println!(
        "buildup: {} pulse lengths in [{}, {}] us -> {}",
        pts.len(),
        args.tau_p_start,
        args.tau_p_end,
        args.output.display()
    );
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(Dataset::from_csv_str(&text)?)
}

fn finish_fit(
    fit: &FitResult,
    summary_param: &str,
    output: &Option<PathBuf>,
) -> Result<(), CliError> {
    if let Some(path) = output {
        write_output(path, &fit.report())?;
    }
    let value = fit.value_of(summary_param).unwrap_or(f64::NAN);
    let sigma = fit.uncertainty_of(summary_param).unwrap_or(f64::NAN);
    println!(
        "fit: {summary_param} = {value:.6} +/- {sigma:.6} (chi2_red = {:.3e}, converged = {})",
        fit.chi2_reduced, fit.converged
    );
    for w in &fit.warnings {
        println!("fit warning: {w}");
    }
    if !fit.converged {
        return Err(CliError::Numerical(
            "fit did not converge within the iteration budget".into(),
        ));
    }
    Ok(())
}

pub fn run_fit(config: &RunConfig, args: &FitArgs) -> Result<(), CliError> {
    echo_config(config);
    match args.model {
        FitModelKind::Lorentzian => {
            let data = read_dataset(&args.input)?;
            let fit = fit_lorentzian(&data)?;
            finish_fit(&fit, "center", &args.output)
        }
        FitModelKind::Exponential => {
            let data = read_dataset(&args.input)?;
            let fit = fit_exponential(&data)?;
            finish_fit(&fit, "decay_time", &args.output)
        }
        FitModelKind::DepthProfile => {
            let (radius_um, thickness_um) = match config.sample.to_spec()?.geometry {
                Geometry::Cylinder {
                    radius_um,
                    thickness_um,
                    ..
                } => (radius_um, thickness_um),
                _ => {
                    return Err(CliError::Validation(
                        "`geometry`: depth-profile fit needs the cylinder geometry".into(),
                    ))
                }
            };
            let model = DepthProfileModel {
                radius_um,
                thickness_um,
                t_eff_us: config.contrast.accumulation_us,
                c_dip_g_nm3: config.sample.c_dip_g_nm3,
                rho_per_nm3: config.sample.rho_per_nm3,
                gamma_mhz_per_g: config.contrast.gamma_e_nv_mhz_per_g,
            };
            let data = read_dataset(&args.input)?;
            let fit = fit_depth_profile(&data, &model)?;
            if args.propagate {
                let widths = NuisanceWidths {
                    t_eff_us: args.width_t,
                    radius_um: args.width_r0,
                    thickness_um: args.width_h,
                };
                let report =
                    propagate_uncertainty(&data, &model, &widths, args.samples, config.io.seed)?;
                println!(
                    "uncertainty: sigma_P = {:.6} (statistical {:.6}, nuisance {:.6}, {} failed draws)",
                    report.sigma_p_total,
                    report.sigma_statistical,
                    report.sigma_nuisance,
                    report.n_failed
                );
                if let Some(path) = &args.output {
                    let mut text = fit.report();
                    writeln!(text, "sigma_p_total = {:.10e}", report.sigma_p_total).unwrap();
                    writeln!(text, "sigma_p_statistical = {:.10e}", report.sigma_statistical)
                        .unwrap();
                    writeln!(text, "sigma_p_nuisance = {:.10e}", report.sigma_nuisance).unwrap();
                    write_output(path, &text)?;
                }
                let value = fit.values[0];
                println!(
                    "fit: polarization = {value:.6} +/- {:.6} (chi2_red = {:.3e}, converged = {})",
                    report.sigma_p_total, fit.chi2_reduced, fit.converged
                );
                return Ok(());
            }
            finish_fit(&fit, "polarization", &args.output)
        }
        FitModelKind::FieldDependence => {
            // signed abscissa: |x| is B0, the sign selects the branch
            let data = read_dataset(&args.input)?;
            let points: Vec<FieldPoint> = (0..data.len())
                .map(|i| FieldPoint {
                    b0_gauss: data.x[i].abs(),
                    omega_mhz: data.y[i],
                    branch: if data.x[i] >= 0.0 {
                        Branch::Plus
                    } else {
                        Branch::Minus
                    },
                    sigma_mhz: data.sigma.as_ref().map(|s| s[i]),
                })
                .collect();
            let fit = fit_field_dependence(&points, config.triplet.to_params())?;
            finish_fit(&fit, "theta_deg", &args.output)
        }
    }
}

/// Quick sanity summary of the configured operating point.
pub fn run_summary(config: &RunConfig) -> Result<(), CliError> {
    echo_config(config);
    let p = config.triplet.to_params();
    let (plus, minus) = transition_frequencies(&p)?;
    let s = config.sample.to_spec()?;
    let m = config.contrast.to_model()?;
    let mean = match s.geometry {
        Geometry::Sphere { .. } => mean_field_sphere(&s)?,
        Geometry::Cylinder { .. } => mean_field_cylinder(&s)?,
        Geometry::HalfSpace { .. } => {
            4.0 * std::f64::consts::PI * s.c_dip_g_nm3 * s.rho_per_nm3 * s.polarization / 3.0
        }
    };
    println!(
        "summary: omega+ = {plus:.3} MHz, omega- = {minus:.3} MHz at {} G; mean B = {mean:.4e} G; SC_pola = {:.4e}",
        p.b0_gauss,
        sc_polarization(mean, &m)
    );
    Ok(())
}

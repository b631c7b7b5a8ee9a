//! Command implementations and error-category mapping.

use std::io::Write;
use std::path::Path;

use ntmt::experiments::{default_battery_transform_with_tol, ExperimentError};
use ntmt::jointdist::JointDistError;
use ntmt::{
    cell_probability, default_battery, enumerate_aperiodic, joint_cdf_terms, run_battery,
    run_joint_histogram, run_rejection_histogram, run_test, BitSequence, CorrelationMatrix,
    EvenDof, JointParams, Template, WhiteningTransform,
};

use crate::config;
use crate::{
    BatteryCmd, Cli, CliError, Command, ExperimentCmd, FileFormat, GenArgs, InputArgs,
    JointdistCmd, TemplatesCmd, TestCmd, WhiteningCmd,
};

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn map_experiment(e: ExperimentError) -> CliError {
    match e {
        ExperimentError::Config(_) | ExperimentError::Template(_) => usage(e),
        ExperimentError::DegenerateFit | ExperimentError::Specfun(_) => numeric(e),
        ExperimentError::JointDist(JointDistError::Convergence { .. }) => numeric(e),
        ExperimentError::JointDist(_) => usage(e),
        ExperimentError::Matching(_) | ExperimentError::Whitening(_) => data(e),
        ExperimentError::ThreadPool(_) => usage(e),
    }
}

fn parse_template(text: &str) -> Result<Template, CliError> {
    Template::parse(text).map_err(usage)
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| data(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| data(format!("cannot write to stdout: {e}")))
        }
    }
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| numeric(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_output(path, text.as_bytes())
}

fn read_sequence(args: &InputArgs) -> Result<BitSequence, CliError> {
    let path = &args.input;
    match args.format {
        FileFormat::Ascii => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
            BitSequence::from_ascii(&text)
                .map_err(|e| data(format!("{}: {e}", path.display())))
        }
        FileFormat::Raw => {
            let bytes = std::fs::read(path)
                .map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
            Ok(BitSequence::from_bytes(&bytes, args.bit_order.into()))
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(args) => gen(args),
        Command::Templates { cmd } => templates(cmd),
        Command::Test { cmd } => test(cmd),
        Command::Battery { cmd } => battery(cmd),
        Command::Whitening { cmd } => whitening(cmd),
        Command::Jointdist { cmd } => jointdist(cmd),
        Command::Experiment { cmd } => experiment(cmd),
    }
}

fn gen(args: GenArgs) -> Result<(), CliError> {
    let spec = ntmt::seed_for_index(args.generator.into(), args.seed, args.index);
    let seq = spec.generate(args.bits);
    match args.format {
        FileFormat::Ascii => {
            let mut text = seq.to_ascii();
            text.push('\n');
            write_output(args.output.as_deref(), text.as_bytes())
        }
        FileFormat::Raw => {
            if !seq.len().is_multiple_of(8) {
                eprintln!(
                    "note: {} bits pad to {} bytes; trailing bits are zero",
                    seq.len(),
                    seq.len().div_ceil(8)
                );
            }
            write_output(args.output.as_deref(), &seq.to_bytes(args.bit_order.into()))
        }
    }
}

fn templates(cmd: TemplatesCmd) -> Result<(), CliError> {
    match cmd {
        TemplatesCmd::Enumerate { length, format } => {
            let list = enumerate_aperiodic(length).map_err(usage)?;
            let text = match format.as_str() {
                "text" => {
                    let mut s: String =
                        list.iter().map(|t| format!("{t}\n")).collect();
                    s.push_str(&format!("# {} aperiodic templates of length {length}\n", list.len()));
                    s
                }
                "json" => {
                    let names: Vec<String> = list.iter().map(|t| t.to_string()).collect();
                    format!("{}\n", serde_json::to_string_pretty(&names).unwrap())
                }
                "csv" => {
                    let mut s = String::from("index,template\n");
                    for (i, t) in list.iter().enumerate() {
                        s.push_str(&format!("{i},{t}\n"));
                    }
                    s
                }
                other => return Err(usage(format!("unknown format {other:?}"))),
            };
            write_output(None, text.as_bytes())
        }
        TemplatesCmd::Rho { t1, t2 } => {
            let a = parse_template(&t1)?;
            let b = parse_template(&t2)?;
            let rho = ntmt::correlation(a, b).map_err(usage)?;
            write_json(None, &serde_json::json!({ "t1": t1, "t2": t2, "rho": rho }))
        }
        TemplatesCmd::Matrix { length, battery, format, output } => {
            let list = match battery.as_str() {
                "all" => enumerate_aperiodic(length).map_err(usage)?,
                "default" => default_battery(length).map_err(usage)?,
                other => {
                    return Err(usage(format!(
                        "unknown battery {other:?}: expected all or default"
                    )))
                }
            };
            let matrix = CorrelationMatrix::build(&list).map_err(usage)?;
            match format.as_str() {
                "csv" => {
                    let mut s = String::from("template");
                    for t in matrix.templates() {
                        s.push_str(&format!(",{t}"));
                    }
                    s.push('\n');
                    for (i, t) in matrix.templates().iter().enumerate() {
                        s.push_str(&t.to_string());
                        for j in 0..matrix.dim() {
                            s.push_str(&format!(",{}", matrix.get(i, j)));
                        }
                        s.push('\n');
                    }
                    write_output(output.as_deref(), s.as_bytes())
                }
                "json" => {
                    let names: Vec<String> =
                        matrix.templates().iter().map(|t| t.to_string()).collect();
                    let rows: Vec<Vec<f64>> = (0..matrix.dim())
                        .map(|i| (0..matrix.dim()).map(|j| matrix.get(i, j)).collect())
                        .collect();
                    write_json(
                        output.as_deref(),
                        &serde_json::json!({ "templates": names, "entries": rows }),
                    )
                }
                other => Err(usage(format!("unknown format {other:?}"))),
            }
        }
    }
}

fn test(cmd: TestCmd) -> Result<(), CliError> {
    match cmd {
        TestCmd::Run { input, template, blocks, output } => {
            let template = parse_template(&template)?;
            let seq = read_sequence(&input)?;
            let outcome = run_test(&seq, template, blocks).map_err(data)?;
            if let Some(w) = ntmt::matching::block_length_warning(outcome.block_len, template.len())
            {
                eprintln!("note: {w}");
            }
            write_json(output.as_deref(), &outcome)
        }
    }
}

fn battery(cmd: BatteryCmd) -> Result<(), CliError> {
    match cmd {
        BatteryCmd::Run { input, blocks, alpha, orthogonalize, transform, output } => {
            let seq = read_sequence(&input)?;
            let loaded: Option<WhiteningTransform> = match (&transform, orthogonalize) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path).map_err(|e| {
                        data(format!("cannot read transform {}: {e}", path.display()))
                    })?;
                    Some(serde_json::from_str(&text).map_err(|e| {
                        data(format!("invalid transform {}: {e}", path.display()))
                    })?)
                }
                (None, true) =>

                    Some(default_battery_transform_with_tol(1e-10).map_err(map_experiment)?.1),
                (None, false) => None,
            };
            let templates = match &loaded {
                Some(t) => t.templates().to_vec(),
                None => default_battery(9).map_err(usage)?,
            };
            let report = run_battery(&seq, &templates, blocks, alpha, loaded.as_ref())
                .map_err(map_experiment)?;
            write_json(output.as_deref(), &report)
        }
    }
}

fn whitening(cmd: WhiteningCmd) -> Result<(), CliError> {
    match cmd {
        WhiteningCmd::Build { tol, output } => {
            let (_, transform) =
                default_battery_transform_with_tol(tol).map_err(map_experiment)?;
            write_json(output.as_deref(), &transform)
        }
        WhiteningCmd::Inspect { path } => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
            let transform: WhiteningTransform = serde_json::from_str(&text)
                .map_err(|e| data(format!("invalid transform {}: {e}", path.display())))?;
            let removed: Vec<String> =
                transform.removed().iter().map(|t| t.to_string()).collect();
            write_json(
                None,
                &serde_json::json!({
                    "items": transform.dim(),
                    "removed": removed,
                    "tolerance": transform.tolerance(),
                    "template_hash": ntmt::experiments::template_list_hash(transform.templates()),
                    "transform_hash": ntmt::experiments::transform_hash(&transform),
                }),
            )
        }
    }
}

fn jointdist(cmd: JointdistCmd) -> Result<(), CliError> {
    match cmd {
        JointdistCmd::Eval { dof, rho, x, y } => {
            let params =
                JointParams::new(EvenDof::new(dof).map_err(usage)?, rho).map_err(usage)?;
            let (f, terms) = joint_cdf_terms(&params, x, y).map_err(|e| match e {
                JointDistError::Convergence { .. } => numeric(e),
                other => usage(other),
            })?;
            write_json(
                None,
                &serde_json::json!({
                    "N": dof, "rho": rho, "X": x, "Y": y, "F": f, "terms_used": terms,
                }),
            )
        }
        JointdistCmd::Grid { dof, rho, grid, output } => {
            if grid < 2 {
                return Err(usage("grid resolution must be at least 2"));
            }
            let params =
                JointParams::new(EvenDof::new(dof).map_err(usage)?, rho).map_err(usage)?;
            let mut s = String::from("p1_lo,p1_hi,p2_lo,p2_hi,probability\n");
            for i in 0..grid {
                for j in 0..grid {
                    let edges = (
                        i as f64 / grid as f64,
                        (i + 1) as f64 / grid as f64,
                        j as f64 / grid as f64,
                        (j + 1) as f64 / grid as f64,
                    );
                    let p = cell_probability(&params, edges.0, edges.1, edges.2, edges.3)
                        .map_err(numeric)?;
                    s.push_str(&format!("{},{},{},{},{p}\n", edges.0, edges.1, edges.2, edges.3));
                }
            }
            write_output(output.as_deref(), s.as_bytes())
        }
    }
}

fn experiment(cmd: ExperimentCmd) -> Result<(), CliError> {
    match cmd {
        ExperimentCmd::Fig1 { pair, overrides, csv, output } => {
            let (a, b) = pair
                .split_once(',')
                .ok_or_else(|| usage("expected --pair T1,T2"))?;
            let t1 = parse_template(a.trim())?;
            let t2 = parse_template(b.trim())?;
            let config = config::resolve(&overrides)?;
            let report = run_joint_histogram(&config, t1, t2).map_err(map_experiment)?;
            for w in &report.warnings {
                eprintln!("note: {w}");
            }
            if let Some(csv_path) = csv {
                let g = config.grid;
                let mut s =
                    String::from("i,j,p1_lo,p1_hi,p2_lo,p2_hi,count,expected,residual\n");
                for i in 0..g {
                    for j in 0..g {
                        s.push_str(&format!(
                            "{i},{j},{},{},{},{},{},{},{}\n",
                            i as f64 / g as f64,
                            (i + 1) as f64 / g as f64,
                            j as f64 / g as f64,
                            (j + 1) as f64 / g as f64,
                            report.counts[i][j],
                            report.theory[i][j] * config.sequences as f64,
                            report.residuals[i][j],
                        ));
                    }
                }
                write_output(Some(&csv_path), s.as_bytes())?;
            }
            write_json(output.as_deref(), &report)
        }
        ExperimentCmd::Fig3 { raw, overrides, csv, output } => {
            let config = config::resolve(&overrides)?;
            let report = run_rejection_histogram(&config, !raw).map_err(map_experiment)?;
            for w in &report.warnings {
                eprintln!("note: {w}");
            }
            if let Some(csv_path) = csv {
                let mut s = String::from("rejections,count,expected\n");
                for (k, (&c, &e)) in
                    report.histogram.iter().zip(&report.expected).enumerate()
                {
                    s.push_str(&format!("{k},{c},{e}\n"));
                }
                write_output(Some(&csv_path), s.as_bytes())?;
            }
            write_json(output.as_deref(), &report)
        }
    }
}

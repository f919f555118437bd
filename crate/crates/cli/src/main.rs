use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oam_epr::export::{
    conditional_csv, density_csv, fmt_real, report_json, series_csv, spectrum_csv,
};
use oam_epr::oam::{
    gauss_spectrum_approx, power_of_two_truncations, rect_spectrum_analytic, truncation_bound,
    variance_series, variance_series_from_spectrum,
};
use oam_epr::{
    conditional_wavefunction, convolve_periodic, evaluate, transform_numeric, ApertureShape,
    ApertureSpec, CriterionOptions, OamCorrelationModel, OamSpectrum,
};
use serde_json::{json, Value};

/// Largest truncation of the analytic variance series when none is given.
const ANALYTIC_M_LIMIT: usize = 1024;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] oam_epr::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_validation() => 1,
            CliError::Io { .. } => 1,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "oam-epr",
    version,
    about = "Angular EPR criterion: aperture densities, OAM spectra and variances"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sampled aperture densities (phi,p); aperture 2 goes to the `_p2` sibling.
    Aperture(Common),
    /// Conditional density and wavefunction (phi,p,psi).
    Convolve(Common),
    /// OAM amplitudes (m,c,c_squared); closed forms go to the `_analytic` sibling.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 64)]
        m_max: usize,
    },
    /// Conditional variance against the truncation index.
    VarianceSeries {
        #[command(flatten)]
        common: Common,
        /// Truncation indices; powers of two up to the limit by default.
        #[arg(long, value_delimiter = ',')]
        m_max: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Source::Numeric)]
        source: Source,
    },
    /// Variance series for super-Gaussian pairs over a list of exponents.
    GammaSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,20,80")]
        gammas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        m_max: Vec<usize>,
    },
    /// Criterion report: lhs, inferred rhs and verdict.
    Criterion {
        #[command(flatten)]
        common: Common,
        /// `perfect`, `perfect:<pump m>` or `table:<path to JSON>`.
        #[arg(long, default_value = "perfect")]
        model: String,
        #[arg(long, default_value_t = 8)]
        tau_grid: usize,
        #[arg(long, default_value_t = 64)]
        m_max: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value_t = Family::Rect)]
    family1: Family,
    #[arg(long, value_enum, default_value_t = Family::Rect)]
    family2: Family,
    /// Width of aperture 1; `0.25pi` style multiples of pi are accepted.
    #[arg(long, default_value = "0.25pi", value_parser = parse_angle)]
    w1: f64,
    #[arg(long, default_value = "0.015625pi", value_parser = parse_angle)]
    w2: f64,
    /// Exponent of tsg apertures.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = oam_epr::DEFAULT_GRID_N)]
    grid_n: usize,
    /// Output file; sibling files are only written when this is set.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Rect,
    Gauss,
    Tsg,
}

impl Family {
    fn shape(self) -> ApertureShape {
        match self {
            Family::Rect => ApertureShape::Rect,
            Family::Gauss => ApertureShape::TruncGauss,
            Family::Tsg => ApertureShape::TruncSuperGauss,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Source {
    Numeric,
    Analytic,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let (num, scale) = match t.strip_suffix("pi") {
        Some("") => ("1", PI),
        Some(rest) => (rest.trim_end_matches('*'), PI),
        None => (t, 1.0),
    };
    let x: f64 = num.parse().map_err(|_| format!("not an angle: {s:?}"))?;
    let v = x * scale;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not a finite angle: {s:?}"))
    }
}

impl Common {
    fn apertures(&self) -> CliResult<(ApertureSpec, ApertureSpec)> {
        Ok((
            ApertureSpec::new(self.family1.shape(), self.w1, self.gamma, 0.0)?,
            ApertureSpec::new(self.family2.shape(), self.w2, self.gamma, 0.0)?,
        ))
    }

    fn record(&self, command: &str) -> String {
        format!(
            "oam-epr {} {command} family1={} w1={} family2={} w2={} gamma={} grid_n={}",
            env!("CARGO_PKG_VERSION"),
            self.family1.shape(),
            fmt_real(self.w1),
            self.family2.shape(),
            fmt_real(self.w2),
            fmt_real(self.gamma),
            self.grid_n
        )
    }
}

/// Files of one run: the main output and suffixed siblings.
struct Output {
    format: Format,
    files: Vec<(String, String)>,
}

impl Output {
    fn new(format: Format) -> Self {
        Self {
            format,
            files: Vec::new(),
        }
    }

    fn push(&mut self, suffix: impl Into<String>, csv: String) {
        let body = match self.format {
            Format::Csv => csv,
            Format::Json => csv_to_json(&csv),
        };
        self.files.push((suffix.into(), body));
    }

    fn write(self, out: Option<&Path>) -> CliResult<()> {
        let Some(path) = out else {
            if let Some((_, body)) = self.files.first() {
                print!("{body}");
            }
            if self.files.len() > 1 {
                eprintln!("note: {} sibling file(s) need --out", self.files.len() - 1);
            }
            return Ok(());
        };
        for (suffix, body) in &self.files {
            let target = sibling(path, suffix);
            fs::write(&target, body).map_err(|source| CliError::Io {
                path: target,
                source,
            })?;
        }
        Ok(())
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    if suffix.is_empty() {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

// Same table as JSON: {"record", "columns", "rows"}.
fn csv_to_json(csv: &str) -> String {
    let mut lines = csv.lines();
    let record = lines.next().unwrap_or("").trim_start_matches('#').trim();
    let columns: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<Vec<Value>> = lines
        .map(|line| {
            line.split(',')
                .map(|cell| {
                    if let Ok(i) = cell.parse::<i64>() {
                        json!(i)
                    } else if let Ok(x) = cell.parse::<f64>() {
                        json!(x)
                    } else {
                        json!(cell)
                    }
                })
                .collect()
        })
        .collect();
    let doc = json!({ "record": record, "columns": columns, "rows": rows });
    let mut s = serde_json::to_string_pretty(&doc).expect("plain JSON values serialize");
    s.push('\n');
    s
}

fn analytic_spectrum(c: &Common, m_max: usize) -> CliResult<Option<OamSpectrum>> {
    Ok(match (c.family1, c.family2) {
        (Family::Rect, Family::Rect) => Some(rect_spectrum_analytic(c.w1, c.w2, m_max)?),
        (Family::Gauss, Family::Gauss) => Some(gauss_spectrum_approx(c.w1, c.w2, m_max)?),
        _ => None,
    })
}

fn wavefunction(
    c: &Common,
) -> CliResult<(oam_epr::AngularDensity, oam_epr::ConditionalWavefunction)> {
    let (a1, a2) = c.apertures()?;
    let p = convolve_periodic(&a1.sample(c.grid_n)?, &a2.sample(c.grid_n)?)?;
    let psi = conditional_wavefunction(&p);
    Ok((p, psi))
}

fn join(ms: &[usize]) -> String {
    ms.iter()
        .map(|m| m.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_model(spec: &str) -> CliResult<OamCorrelationModel> {
    if spec == "perfect" {
        return Ok(OamCorrelationModel::perfect(0));
    }
    if let Some(m) = spec.strip_prefix("perfect:") {
        let pump = m
            .parse()
            .map_err(|_| CliError::Usage(format!("bad pump OAM in --model {spec:?}")))?;
        return Ok(OamCorrelationModel::perfect(pump));
    }
    if let Some(path) = spec.strip_prefix("table:") {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read model table {path}: {e}")))?;
        return Ok(OamCorrelationModel::table_from_json(&text)?);
    }
    Err(CliError::Usage(format!(
        "--model must be perfect, perfect:<m> or table:<path>, got {spec:?}"
    )))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Aperture(c) => {
            let (a1, a2) = c.apertures()?;
            let mut out = Output::new(c.format.unwrap_or(Format::Csv));
            let record = c.record("aperture");
            out.push(
                "",
                density_csv(&a1.sample(c.grid_n)?, &format!("{record} aperture=1")),
            );
            out.push(
                "_p2",
                density_csv(&a2.sample(c.grid_n)?, &format!("{record} aperture=2")),
            );
            out.write(c.out.as_deref())
        }
        Command::Convolve(c) => {
            let (p, psi) = wavefunction(&c)?;
            let mut out = Output::new(c.format.unwrap_or(Format::Csv));
            out.push("", conditional_csv(&p, &psi, &c.record("convolve"))?);
            out.write(c.out.as_deref())
        }
        Command::Spectrum { common: c, m_max } => {
            let (_, psi) = wavefunction(&c)?;
            let spectrum = transform_numeric(&psi, m_max)?;
            let record = format!("{} m_max={m_max}", c.record("spectrum"));
            let mut out = Output::new(c.format.unwrap_or(Format::Csv));
            out.push(
                "",
                spectrum_csv(&spectrum, &format!("{record} source=numeric")),
            );
            if let Some(s) = analytic_spectrum(&c, m_max)? {
                out.push(
                    "_analytic",
                    spectrum_csv(&s, &format!("{record} source={}", s.provenance())),
                );
            }
            out.write(c.out.as_deref())
        }
        Command::VarianceSeries {
            common: c,
            m_max,
            source,
        } => {
            let series = match source {
                Source::Numeric => {
                    let ms = if m_max.is_empty() {
                        power_of_two_truncations(truncation_bound(c.grid_n))
                    } else {
                        m_max
                    };
                    let (_, psi) = wavefunction(&c)?;
                    variance_series(&psi, &ms)?
                }
                Source::Analytic => {
                    let ms = if m_max.is_empty() {
                        power_of_two_truncations(ANALYTIC_M_LIMIT)
                    } else {
                        m_max
                    };
                    let top = ms.last().copied().unwrap_or(0);
                    let spectrum = analytic_spectrum(&c, top)?.ok_or_else(|| {
                        CliError::Usage(
                            "--source analytic needs a rect/rect or gauss/gauss pair".into(),
                        )
                    })?;
                    variance_series_from_spectrum(&spectrum, &ms)?
                }
            };
            let ms: Vec<usize> = series.entries.iter().map(|&(m, _)| m).collect();
            let source = match source {
                Source::Numeric => "numeric",
                Source::Analytic => "analytic",
            };
            let record = format!(
                "{} m_max={} source={source}",
                c.record("variance-series"),
                join(&ms)
            );
            let mut out = Output::new(c.format.unwrap_or(Format::Csv));
            out.push("", series_csv(&series, &record));
            out.write(c.out.as_deref())
        }
        Command::GammaSweep {
            common: c,
            gammas,
            m_max,
        } => {
            if let Some(g) = gammas.iter().find(|g| !(1.0..=100.0).contains(*g)) {
                return Err(CliError::Usage(format!(
                    "--gammas entries must lie in [1, 100], got {g}"
                )));
            }
            let ms = if m_max.is_empty() {
                power_of_two_truncations(truncation_bound(c.grid_n))
            } else {
                m_max
            };
            let record = format!(
                "oam-epr {} gamma-sweep family1=tsg w1={} family2=tsg w2={} gammas={} grid_n={} m_max={}",
                env!("CARGO_PKG_VERSION"),
                fmt_real(c.w1),
                fmt_real(c.w2),
                gammas.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(","),
                c.grid_n,
                join(&ms)
            );
            let mut summary = format!("# {record}\ngamma,classification,final_variance\n");
            let mut files = Vec::new();
            for &g in &gammas {
                let pair = Common {
                    family1: Family::Tsg,
                    family2: Family::Tsg,
                    gamma: g,
                    out: None,
                    format: None,
                    ..c
                };
                let (_, psi) = wavefunction(&pair)?;
                let series = variance_series(&psi, &ms)?;
                let _ = writeln!(
                    summary,
                    "{g},{},{}",
                    series.classification,
                    fmt_real(series.final_variance())
                );
                files.push((
                    format!("_gamma{g}"),
                    series_csv(&series, &format!("{record} gamma={g}")),
                ));
            }
            let mut out = Output::new(c.format.unwrap_or(Format::Csv));
            out.push("", summary);
            for (suffix, csv) in files {
                out.push(suffix, csv);
            }
            out.write(c.out.as_deref())
        }
        Command::Criterion {
            common: c,
            model,
            tau_grid,
            m_max,
        } => {
            let model = parse_model(&model)?;
            let (a1, a2) = c.apertures()?;
            let opts = CriterionOptions {
                tau_grid,
                m_max,
                grid_n: c.grid_n,
            };
            let report = evaluate(&model, &a1, &a2, &opts)?;
            let body = match c.format.unwrap_or(Format::Json) {
                Format::Json => report_json(&report)?,
                Format::Csv => format!(
                    "# {} model={} tau_grid={tau_grid} m_max={m_max}\nlhs,rhs,verdict,classification\n{},{},{},{}\n",
                    c.record("criterion"),
                    serde_json::to_string(&report.inputs.model).unwrap_or_default(),
                    fmt_real(report.lhs),
                    fmt_real(report.rhs),
                    report.verdict,
                    report.classification
                ),
            };
            match &c.out {
                Some(path) => fs::write(path, body).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                }),
                None => {
                    print!("{body}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_in_units_of_pi() {
        assert_eq!(parse_angle("0.25pi").unwrap(), 0.25 * PI);
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("0.5*pi").unwrap(), 0.5 * PI);
        assert_eq!(parse_angle("0.3").unwrap(), 0.3);
        assert!(parse_angle("abc").is_err());
        assert!(parse_angle("infpi").is_err());
    }

    #[test]
    fn sibling_names() {
        assert_eq!(
            sibling(Path::new("d/spec.csv"), "_analytic"),
            Path::new("d/spec_analytic.csv")
        );
        assert_eq!(
            sibling(Path::new("d/spec.csv"), ""),
            Path::new("d/spec.csv")
        );
        assert_eq!(sibling(Path::new("out"), "_p2"), Path::new("out_p2"));
    }

    #[test]
    fn json_table_keeps_types() {
        let v: Value =
            serde_json::from_str(&csv_to_json("# rec a=1\nm,c,k\n-2,1.5e-1,converged\n")).unwrap();
        assert_eq!(v["record"], "rec a=1");
        assert_eq!(v["rows"][0][0], -2);
        assert_eq!(v["rows"][0][1], 0.15);
        assert_eq!(v["rows"][0][2], "converged");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

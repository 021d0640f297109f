//! Convergence studies on the crossing-fracture benchmark.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use crate::element::quadrature;
use crate::error::{Error, Result};
use crate::field::FieldEvaluator;
use crate::geometry::{build_cross_geometry, StratifiedGeometry};
use crate::mesh::{build_mesh, BoundaryTag, MixedMesh};
use crate::solver::{solve_method, BoundaryCondition, ModelCoefficients, Solution};
use crate::spaces::Method;

/// Geometry and coefficients of the benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub fracture_x: f64,
    pub fracture_y: f64,
    pub aperture: f64,
    pub k_bulk: f64,
    pub k_tangent: f64,
    pub k_normal: f64,
    pub bc_bottom: f64,
    pub bc_fracture_top: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            fracture_x: 0.5,
            fracture_y: 0.5,
            aperture: 1e-3,
            k_bulk: 1.0,
            k_tangent: 100.0,
            k_normal: 100.0,
            bc_bottom: 0.0,
            bc_fracture_top: 1.0,
        }
    }
}

impl BenchmarkConfig {
    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    /// Keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = BenchmarkConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line: n + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| err(format!("`{}` is not a number", value.trim())))?;
            let slot = match key {
                "fracture_x" => &mut cfg.fracture_x,
                "fracture_y" => &mut cfg.fracture_y,
                "aperture" => &mut cfg.aperture,
                "k_bulk" => &mut cfg.k_bulk,
                "k_tangent" => &mut cfg.k_tangent,
                "k_normal" => &mut cfg.k_normal,
                "bc_bottom" => &mut cfg.bc_bottom,
                "bc_fracture_top" => &mut cfg.bc_fracture_top,
                other => return Err(err(format!("unknown key `{other}`"))),
            };
            *slot = value;
        }
        Ok(cfg)
    }

    pub fn geometry(&self) -> Result<StratifiedGeometry> {
        build_cross_geometry(self.fracture_x, self.fracture_y, self.aperture)
    }

    pub fn coefficients(&self, geometry: &StratifiedGeometry) -> ModelCoefficients {
        let mut c = ModelCoefficients::benchmark(geometry);
        c.set_isotropic_bulk(self.k_bulk);
        for s in &geometry.subdomains {
            if s.dim < geometry.n {
                c.k_tangent[s.id] = self.k_tangent;
                c.k_normal[s.id] = self.k_normal;
            }
        }
        c.set_bottom_pressure(self.bc_bottom);
        c.fracture_bc
            .insert(BoundaryTag::Top, BoundaryCondition::Pressure(self.bc_fracture_top));
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub methods: Vec<Method>,
    pub levels: Vec<u32>,
    pub reference_level: u32,
    pub benchmark: BenchmarkConfig,
    pub out_dir: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            methods: Method::ALL.to_vec(),
            levels: (2..=6).collect(),
            reference_level: 7,
            benchmark: BenchmarkConfig::default(),
            out_dir: None,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Error::Config { line: 0, message: m };
        if self.methods.is_empty() {
            return Err(invalid("no methods selected".into()));
        }
        if self.levels.is_empty() {
            return Err(invalid("no levels selected".into()));
        }
        let mut sorted = self.levels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != self.levels {
            return Err(invalid("levels must be strictly increasing".into()));
        }
        if self.reference_level <= *sorted.last().unwrap() {
            return Err(invalid(format!(
                "reference level {} must exceed the finest level {}",
                self.reference_level,
                sorted.last().unwrap()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldKind {
    Pressure,
    Flux,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Pressure => "pressure",
            FieldKind::Flux => "flux",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub method: Method,
    pub level: u32,
    pub h: f64,
    /// Dimension `d` of the group `Omega^d`.
    pub group: usize,
    pub field: FieldKind,
    pub error: f64,
    /// `log2(e_{L-1} / e_L)`, when the previous level was computed.
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    pub fn get(&self, method: Method, level: u32, group: usize, field: FieldKind) -> Option<&ErrorRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.level == level && r.group == group && r.field == field)
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = Vec::new();
        for r in &self.rows {
            if !m.contains(&r.method) {
                m.push(r.method);
            }
        }
        m
    }

    pub fn levels(&self) -> Vec<u32> {
        let mut l: Vec<u32> = self.rows.iter().map(|r| r.level).collect();
        l.sort_unstable();
        l.dedup();
        l
    }
}

type ErrorMap = BTreeMap<(usize, FieldKind), f64>;

/// Squared error and squared reference norm per `(group, field)`.
type Accumulator = BTreeMap<(usize, FieldKind), (f64, f64)>;

/// Relative L2 errors of `coarse` against `fine` per dimension group, by
/// evaluating both at the quadrature points of the fine mesh.
pub fn relative_errors(
    coarse: &FieldEvaluator,
    fine: &FieldEvaluator,
    fine_mesh: &MixedMesh,
) -> BTreeMap<(usize, FieldKind), f64> {
    let mut acc = Accumulator::new();
    let mixed = fine.solution.method.is_mixed();
    for s in &fine_mesh.geometry.subdomains {
        let i = s.id;
        let m = fine_mesh.mesh(i);
        if s.dim == 0 {
            let p = m.vertices[0];
            let pf = fine.cell_pressure(i, 0, p);
            let pc = coarse.pressure_at(i, p).expect("intersection point");
            let e = acc.entry((0, FieldKind::Pressure)).or_default();
            e.0 += (pf - pc).powi(2);
            e.1 += pf * pf;
            continue;
        }
        for c in 0..m.num_cells() {
            for (p, w) in quadrature(m, c) {
                let pf = fine.cell_pressure(i, c, p);
                let pc = coarse.pressure_at(i, p).expect("nested meshes");
                let e = acc.entry((s.dim, FieldKind::Pressure)).or_default();
                e.0 += w * (pf - pc).powi(2);
                e.1 += w * pf * pf;
                if mixed {
                    let uf = fine.cell_flux(i, c, p).unwrap();
                    let uc = coarse.flux_at(i, p).unwrap();
                    let e = acc.entry((s.dim, FieldKind::Flux)).or_default();
                    e.0 += w * ((uf[0] - uc[0]).powi(2) + (uf[1] - uc[1]).powi(2));
                    e.1 += w * (uf[0] * uf[0] + uf[1] * uf[1]);
                }
            }
        }
    }
    acc.into_iter()
        .map(|(k, (err, norm))| (k, if norm > 0.0 { (err / norm).sqrt() } else { err.sqrt() }))
        .collect()
}

fn study_method(cfg: &StudyConfig, geometry: &StratifiedGeometry, method: Method) -> Result<Vec<ErrorRow>> {
    let coeffs = cfg.benchmark.coefficients(geometry);
    let wrap = |level: u32| {
        move |e: Error| Error::Study {
            method: method.name().to_string(),
            level,
            source: Box::new(e),
        }
    };
    let solve_at = |level: u32| -> Result<(MixedMesh, Solution)> {
        let mesh = build_mesh(geometry, level).map_err(wrap(level))?;
        let sol = solve_method(&mesh, &coeffs, method).map_err(wrap(level))?;
        Ok((mesh, sol))
    };
    let (fine_mesh, fine_sol) = solve_at(cfg.reference_level)?;
    let fine = FieldEvaluator::new(&fine_mesh, &fine_sol).map_err(wrap(cfg.reference_level))?;
    let mut rows = Vec::new();
    let mut previous: Option<(u32, ErrorMap)> = None;
    for &level in &cfg.levels {
        let (mesh, sol) = solve_at(level)?;
        let coarse = FieldEvaluator::new(&mesh, &sol).map_err(wrap(level))?;
        let errors = relative_errors(&coarse, &fine, &fine_mesh);
        for (&(group, field), &error) in errors.iter().rev() {
            let rate = previous
                .as_ref()
                .filter(|(l, _)| *l + 1 == level)
                .and_then(|(_, prev)| prev.get(&(group, field)))
                .map(|&e0| (e0 / error).log2());
            rows.push(ErrorRow {
                method,
                level,
                h: mesh.h(),
                group,
                field,
                error,
                rate,
            });
        }
        previous = Some((level, errors));
    }
    Ok(rows)
}

/// Solves every method at the reference level and at each study level and
/// reports the relative errors of the coarse solutions.
///
/// Methods run on separate threads; the report is ordered by method, level,
/// decreasing group dimension, then field.
pub fn run_study(cfg: &StudyConfig) -> Result<ErrorReport> {
    cfg.validate()?;
    let geometry = cfg.benchmark.geometry()?;
    let results: Vec<Result<Vec<ErrorRow>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .methods
            .iter()
            .map(|&m| {
                let g = &geometry;
                scope.spawn(move || study_method(cfg, g, m))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("study thread panicked"))
            .collect()
    });
    let mut report = ErrorReport::default();
    for r in results {
        report.rows.extend(r?);
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Text,
    Svg,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "text" => Ok(OutputFormat::Text),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(Error::Config {
                line: 0,
                message: format!("unknown format `{other}` (expected csv, text or svg)"),
            }),
        }
    }
}

impl OutputFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "errors.csv",
            OutputFormat::Text => "errors.txt",
            OutputFormat::Svg => "errors.svg",
        }
    }
}

pub const CSV_HEADER: &str = "method,level,h,group,field,error,rate";

pub fn to_csv(report: &ErrorReport) -> String {
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in &report.rows {
        let rate = r.rate.map(|v| format!("{v:e}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{:e},{},{},{:e},{}",
            r.method.name(),
            r.level,
            r.h,
            r.group,
            r.field.name(),
            r.error,
            rate
        );
    }
    s
}

fn columns(method: Method) -> &'static [FieldKind] {
    if method.is_mixed() {
        &[FieldKind::Pressure, FieldKind::Flux]
    } else {
        &[FieldKind::Pressure]
    }
}

/// Aligned table with one row per (group, level) and an error/rate column
/// pair per (method, field); three significant digits.
pub fn to_text(report: &ErrorReport) -> String {
    let methods = report.methods();
    let mut header = vec!["domain".to_string(), "h".to_string()];
    for &m in &methods {
        for f in columns(m) {
            header.push(format!("{}:{}", m.name(), f.name()));
            header.push("rate".to_string());
        }
    }
    let mut lines = vec![header];
    for group in [2, 1, 0] {
        for &level in &report.levels() {
            let mut row = vec![format!("Omega^{group}"), format!("2^-{level}")];
            let mut any = false;
            for &m in &methods {
                for &f in columns(m) {
                    match report.get(m, level, group, f) {
                        Some(r) => {
                            any = true;
                            row.push(format!("{:.2e}", r.error));
                            row.push(r.rate.map_or("-".into(), |v| format!("{v:.2}")));
                        }
                        None => {
                            row.push("N/A".into());
                            row.push("-".into());
                        }
                    }
                }
            }
            if any {
                lines.push(row);
            }
        }
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|j| lines.iter().map(|l| l[j].len()).max().unwrap())
        .collect();
    let mut s = String::new();
    for l in &lines {
        let cells: Vec<String> = l.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        s.push_str(cells.join("  ").trim_end());
        s.push('\n');
    }
    s
}

/// Parses the table written by [`to_text`] back into rows (errors and rates
/// at the printed precision). `h` is recomputed from the level.
pub fn parse_text(text: &str) -> Result<ErrorReport> {
    let bad = |line: usize, m: &str| Error::Config {
        line,
        message: m.to_string(),
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty table"))?;
    let cols: Vec<(Method, FieldKind)> = header
        .split_whitespace()
        .skip(2)
        .step_by(2)
        .map(|c| {
            let (m, f) = c.split_once(':').ok_or_else(|| bad(1, "malformed header"))?;
            let field = if f == "flux" {
                FieldKind::Flux
            } else {
                FieldKind::Pressure
            };
            let method = m.parse::<Method>().map_err(|e| bad(1, &e))?;
            Ok((method, field))
        })
        .collect::<Result<_>>()?;
    let mut report = ErrorReport::default();
    for (n, line) in lines {
        let cells: Vec<&str> = line.split_whitespace().collect();
        if cells.len() != 2 + 2 * cols.len() {
            return Err(bad(n + 1, "wrong number of columns"));
        }
        let group: usize = cells[0]
            .strip_prefix("Omega^")
            .and_then(|g| g.parse().ok())
            .ok_or_else(|| bad(n + 1, "malformed domain"))?;
        let level: u32 = cells[1]
            .strip_prefix("2^-")
            .and_then(|g| g.parse().ok())
            .ok_or_else(|| bad(n + 1, "malformed grid size"))?;
        for (k, &(method, field)) in cols.iter().enumerate() {
            let e = cells[2 + 2 * k];
            if e == "N/A" {
                continue;
            }
            let error = e.parse().map_err(|_| bad(n + 1, "malformed error"))?;
            let r = cells[3 + 2 * k];
            let rate = if r == "-" {
                None
            } else {
                Some(r.parse().map_err(|_| bad(n + 1, "malformed rate"))?)
            };
            report.rows.push(ErrorRow {
                method,
                level,
                h: 0.5f64.powi(level as i32),
                group,
                field,
                error,
                rate,
            });
        }
    }
    Ok(report)
}

const PANEL: f64 = 300.0;
const MARGIN: f64 = 50.0;

/// Plot coordinates of one (method, field) series in a panel: `(log2(1/h), log2(error))`.
pub fn series(report: &ErrorReport, method: Method, group: usize, field: FieldKind) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.method == method && r.group == group && r.field == field && r.error > 0.0)
        .map(|r| (-r.h.log2(), r.error.log2()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

/// Log-log plots of error against `h`, one panel per dimension group.
pub fn to_svg(report: &ErrorReport) -> String {
    let groups: Vec<usize> = [2, 1, 0]
        .into_iter()
        .filter(|g| report.rows.iter().any(|r| r.group == *g))
        .collect();
    let width = groups.len().max(1) as f64 * (PANEL + MARGIN) + MARGIN;
    let height = PANEL + 2.0 * MARGIN + 20.0;
    let palette = ["#1b9e77", "#d95f02", "#7570b3"];
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let all: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (-r.h.log2(), r.error.log2()))
        .collect();
    let (xmin, xmax) = bounds(all.iter().map(|p| p.0));
    let (ymin, ymax) = bounds(all.iter().map(|p| p.1));
    for (k, &group) in groups.iter().enumerate() {
        let x0 = MARGIN + k as f64 * (PANEL + MARGIN);
        let y0 = MARGIN;
        let px = |x: f64| x0 + (x - xmin) / (xmax - xmin) * PANEL;
        let py = |y: f64| y0 + (ymax - y) / (ymax - ymin) * PANEL;
        let _ = writeln!(
            s,
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{PANEL}\" height=\"{PANEL}\" fill=\"none\" stroke=\"black\"/>"
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">Omega^{group}</text>",
            x0 + PANEL / 2.0,
            y0 - 10.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">log2(1/h)</text>",
            x0 + PANEL / 2.0,
            y0 + PANEL + 30.0
        );
        for tick in (xmin.ceil() as i32)..=(xmax.floor() as i32) {
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{tick}</text>",
                px(tick as f64),
                y0 + PANEL + 14.0
            );
        }
        let mut legend = 0;
        for (mi, &m) in report.methods().iter().enumerate() {
            for &f in columns(m) {
                let pts = series(report, m, group, f);
                if pts.is_empty() {
                    continue;
                }
                let dash = if f == FieldKind::Flux {
                    " stroke-dasharray=\"5,3\""
                } else {
                    ""
                };
                let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.3},{:.3}", px(x), py(y))).collect();
                let _ = writeln!(
                    s,
                    "<polyline data-series=\"{}:{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{dash}/>",
                    m.name(),
                    f.name(),
                    coords.join(" "),
                    palette[mi % palette.len()]
                );
                let _ = writeln!(
                    s,
                    "<text x=\"{}\" y=\"{}\" fill=\"{}\">{} {}</text>",
                    x0 + 8.0,
                    y0 + PANEL - 8.0 - 13.0 * legend as f64,
                    palette[mi % palette.len()],
                    m.name(),
                    f.name()
                );
                legend += 1;
            }
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"12\" y=\"{}\" transform=\"rotate(-90 12 {})\" text-anchor=\"middle\">log2(relative error)</text>",
        MARGIN + PANEL / 2.0,
        MARGIN + PANEL / 2.0
    );
    s.push_str("</svg>\n");
    s
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

pub fn render(report: &ErrorReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => to_csv(report),
        OutputFormat::Text => to_text(report),
        OutputFormat::Svg => to_svg(report),
    }
}

/// Writes the report in `format` into `dir` and returns the file path.
pub fn emit(report: &ErrorReport, format: OutputFormat, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format.file_name());
    std::fs::write(&path, render(report, format))?;
    Ok(path)
}

impl fmt::Display for ErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_text(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ErrorReport {
        let mut rows = Vec::new();
        for (m, groups) in [(Method::Primal, 1usize), (Method::Mixed1, 2)] {
            for level in 2..5u32 {
                for group in [2usize, 1, 0] {
                    for &field in columns(m).iter().take(if group == 0 { 1 } else { groups }) {
                        let error = 0.3 * 0.25f64.powi(level as i32) * (1.0 + group as f64);
                        rows.push(ErrorRow {
                            method: m,
                            level,
                            h: 0.5f64.powi(level as i32),
                            group,
                            field,
                            error,
                            rate: (level > 2).then_some(2.0),
                        });
                    }
                }
            }
        }
        ErrorReport { rows }
    }

    #[test]
    fn config_parsing() {
        let cfg = BenchmarkConfig::parse("# comment\nfracture_x = 0.25\n\n k_normal=1e4 # inline\n").unwrap();
        assert_eq!(cfg.fracture_x, 0.25);
        assert_eq!(cfg.k_normal, 1e4);
        assert_eq!(cfg.fracture_y, 0.5);
        assert!(matches!(
            BenchmarkConfig::parse("colour = 3"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(matches!(
            BenchmarkConfig::parse("\naperture = x"),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(BenchmarkConfig::parse("aperture").is_err());
    }

    #[test]
    fn study_config_validation() {
        assert!(StudyConfig::default().validate().is_ok());
        let cfg = StudyConfig {
            reference_level: 6,
            ..StudyConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = StudyConfig {
            levels: vec![3, 2],
            ..StudyConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_has_one_row_per_entry() {
        let r = sample();
        let csv = to_csv(&r);
        // primal: 3 groups; mixed1: flux on two groups in addition
        assert_eq!(csv.lines().count(), 1 + 3 * 3 + 3 * 5);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    }

    #[test]
    fn text_round_trip() {
        let r = sample();
        let back = parse_text(&to_text(&r)).unwrap();
        assert_eq!(back.rows.len(), r.rows.len());
        for row in &r.rows {
            let b = back.get(row.method, row.level, row.group, row.field).unwrap();
            assert!(((b.error - row.error) / row.error).abs() < 5e-3);
            assert_eq!(b.rate.is_some(), row.rate.is_some());
        }
        assert!(to_text(&r).contains("N/A"));
    }

    #[test]
    fn svg_panels() {
        let svg = to_svg(&sample());
        assert_eq!(svg.matches("<rect").count(), 3);
        assert_eq!(svg.matches("<polyline").count(), 3 + 5);
    }
}

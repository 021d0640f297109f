use mixdim::harness::{
    emit, run_study, series, to_csv, to_svg, BenchmarkConfig, FieldKind, OutputFormat, StudyConfig, CSV_HEADER,
};
use mixdim::spaces::Method;

fn config(methods: &[Method], levels: &[u32], reference: u32) -> StudyConfig {
    StudyConfig {
        methods: methods.to_vec(),
        levels: levels.to_vec(),
        reference_level: reference,
        benchmark: BenchmarkConfig::default(),
        out_dir: None,
    }
}

#[test]
fn single_level_has_no_rates() {
    let report = run_study(&config(&Method::ALL, &[2], 3)).unwrap();
    assert_eq!(report.levels(), vec![2]);
    assert!(!report.rows.is_empty());
    assert!(report.rows.iter().all(|r| r.rate.is_none()));
    // primal: pressure in three groups; mixed: pressure in three, flux in two
    assert_eq!(report.rows.len(), 3 + 5 + 5);
}

#[test]
fn reports_are_reproducible() {
    let cfg = config(&[Method::Mixed1, Method::Primal], &[2, 3], 4);
    let a = to_csv(&run_study(&cfg).unwrap());
    let b = to_csv(&run_study(&cfg).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.lines().next(), Some(CSV_HEADER));
}

#[test]
fn errors_decrease_under_refinement() {
    let report = run_study(&config(&Method::ALL, &[2, 3, 4, 5], 6)).unwrap();
    for m in Method::ALL {
        for group in [0, 1, 2] {
            for field in [FieldKind::Pressure, FieldKind::Flux] {
                let errors: Vec<f64> = (2..=5)
                    .filter_map(|l| report.get(m, l, group, field).map(|r| r.error))
                    .collect();
                assert!(
                    errors.windows(2).all(|w| w[1] < w[0]),
                    "{m} {group} {field:?}: {errors:?}"
                );
            }
        }
    }
}

fn polyline(svg: &str, name: &str) -> Vec<Vec<(f64, f64)>> {
    let key = format!("data-series=\"{name}\" points=\"");
    svg.match_indices(&key)
        .map(|(i, _)| {
            let rest = &svg[i + key.len()..];
            rest[..rest.find('"').unwrap()]
                .split(' ')
                .map(|p| {
                    let (x, y) = p.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect()
        })
        .collect()
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let (a, b) = (pts[0], pts[pts.len() - 1]);
    (b.1 - a.1) / (b.0 - a.0)
}

#[test]
fn plotted_slopes_match_rates() {
    let report = run_study(&config(&[Method::Mixed2], &[2, 3, 4], 5)).unwrap();
    let svg = to_svg(&report);
    // panels are drawn left to right for groups 2, 1, 0
    let pressure = polyline(&svg, "mixed2:pressure");
    let flux = polyline(&svg, "mixed2:flux");
    assert_eq!(pressure.len(), 3);
    assert_eq!(flux.len(), 2);
    for (k, group) in [2usize, 1].into_iter().enumerate() {
        let mut mean = [0.0; 2];
        let mut data = [0.0; 2];
        for (j, field) in [FieldKind::Pressure, FieldKind::Flux].into_iter().enumerate() {
            let rates: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.group == group && r.field == field)
                .filter_map(|r| r.rate)
                .collect();
            mean[j] = rates.iter().sum::<f64>() / rates.len() as f64;
            data[j] = slope(&series(&report, Method::Mixed2, group, field));
            assert!(
                (-data[j] - mean[j]).abs() <= 0.05,
                "group {group}: {} vs {}",
                data[j],
                mean[j]
            );
        }
        // both axes are scaled linearly per panel, so slope ratios survive plotting
        let plotted = slope(&pressure[k]) / slope(&flux[k]);
        assert!((plotted - data[0] / data[1]).abs() <= 0.05 * (data[0] / data[1]).abs());
    }
}

#[test]
fn emit_writes_every_format() {
    let report = run_study(&config(&[Method::Primal], &[2, 3], 4)).unwrap();
    let dir = std::env::temp_dir().join(format!("mixdim-study-{}", std::process::id()));
    for f in [OutputFormat::Csv, OutputFormat::Text, OutputFormat::Svg] {
        let path = emit(&report, f, &dir).unwrap();
        assert!(std::fs::metadata(&path).unwrap().len() > 0);
    }
    let blocker = dir.join("errors.csv");
    assert!(emit(&report, OutputFormat::Text, &blocker).is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn invalid_studies_are_rejected() {
    assert!(run_study(&config(&[Method::Primal], &[3, 2], 4)).is_err());
    assert!(run_study(&config(&[Method::Primal], &[2, 3], 3)).is_err());
}

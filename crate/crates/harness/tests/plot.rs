use std::path::PathBuf;

use distcritic_harness::aggregate::AggregateRow;
use distcritic_harness::plot::{emit_plot, render_svg, Curve};

fn curve(name: &str, points: &[(u64, f64, f64)]) -> Curve {
    Curve {
        name: name.into(),
        rows: points
            .iter()
            .map(|&(step, mean, std)| AggregateRow { step, mean, std, runs: 3 })
            .collect(),
    }
}

fn attr(tag: &str, name: &str) -> String {
    let start = tag.find(&format!("{name}=\"")).unwrap() + name.len() + 2;
    tag[start..].split('"').next().unwrap().to_string()
}

#[test]
fn flat_zero_curve_is_one_polyline_on_the_zero_tick() {
    let svg = render_svg(&[curve("flat", &[(0, 0.0, 0.0), (500, 0.0, 0.0), (1000, 0.0, 0.0)])]).unwrap();
    let polylines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
    assert_eq!(polylines.len(), 1);
    let ys: Vec<String> = attr(polylines[0], "points")
        .split(' ')
        .map(|p| p.split(',').nth(1).unwrap().to_string())
        .collect();
    assert!(ys.iter().all(|y| *y == ys[0]));
    let zero_tick = svg
        .lines()
        .filter(|l| l.starts_with(r#"<text class="ytick""#))
        .find(|l| l.split('>').nth(1).unwrap().trim_end_matches("</text").parse::<f64>() == Ok(0.0))
        .expect("zero tick");
    assert_eq!(attr(zero_tick, "y"), ys[0]);
}

#[test]
fn legend_follows_input_order_and_axes_are_labelled() {
    let curves = [
        curve("sac-learned-51", &[(0, -1200.0, 50.0), (1000, -300.0, 80.0)]),
        curve("sac-fixed-7", &[(0, -1250.0, 40.0), (1000, -250.0, 60.0)]),
    ];
    let svg = render_svg(&curves).unwrap();
    let legend: Vec<&str> = svg
        .lines()
        .filter(|l| l.starts_with(r#"<text class="legend""#))
        .map(|l| l.split('>').nth(1).unwrap().trim_end_matches("</text"))
        .collect();
    assert_eq!(legend, vec!["sac-learned-51", "sac-fixed-7"]);
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches(r#"<polygon class="band""#).count(), 2);
    assert!(svg.contains(">Environment steps<") && svg.contains(">Evaluation return<"));
}

fn golden_input() -> Vec<Curve> {
    vec![
        curve(
            "td3-fixed-7",
            &[(0, -1350.5, 120.25), (1000, -900.0, 200.0), (2000, -410.75, 150.5), (3000, -180.0, 60.0)],
        ),
        curve(
            "td3-sampled-7",
            &[(0, -1300.0, 90.0), (1000, -1000.5, 250.0), (2000, -500.0, 175.0), (3000, -200.25, 80.0)],
        ),
        curve(
            "td3-learned-7",
            &[(0, -1280.0, 100.0), (1000, -950.0, 210.0), (2000, -450.0, 140.0), (3000, -190.5, 70.0)],
        ),
    ]
}

#[test]
fn output_matches_golden_file() {
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_plot.svg");
    let svg = render_svg(&golden_input()).unwrap();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &svg).unwrap();
    }
    assert_eq!(svg, std::fs::read_to_string(&golden).unwrap());
    assert_eq!(svg, render_svg(&golden_input()).unwrap());
}

#[test]
fn emit_writes_the_rendered_text() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig.svg");
    emit_plot(&golden_input(), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), render_svg(&golden_input()).unwrap());
    assert!(emit_plot(&[], &path).is_err());
}

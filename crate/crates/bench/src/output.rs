use std::io::Write;
use std::path::Path;

use plotters::prelude::*;

use crate::config::SweepVariable;
use crate::sweep::AggregateRow;

pub const CSV_HEADER: &str = "sweep_variable,sweep_value,method,mean_mse,stderr_mse,trials,mean_iterations";

pub fn write_csv<W: Write>(rows: &[AggregateRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:e},{:e},{},{}",
            r.variable, r.value, r.method, r.mean_mse, r.stderr_mse, r.trials, r.mean_iterations
        )?;
    }
    Ok(())
}

pub fn save_csv(rows: &[AggregateRow], path: &Path) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(rows, &mut w)?;
    w.flush()
}

fn log_range(values: impl Iterator<Item = f64>) -> std::ops::Range<f64> {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return 1e-12..1.0;
    }
    lo / 2.0..hi * 2.0
}

/// Mean MSE against the sweep value, one series per method. The MSE axis is
/// logarithmic, and so is the sweep axis when sweeping `N`.
pub fn save_plot(rows: &[AggregateRow], path: &Path) -> Result<(), Box<dyn std::error::Error>> {
    let Some(first) = rows.first() else {
        return Err("no rows to plot".into());
    };
    let variable = first.variable;
    let mut methods: Vec<_> = rows.iter().map(|r| r.method).collect();
    methods.dedup();
    methods.sort();
    methods.dedup();
    let y_range = log_range(rows.iter().map(|r| r.mean_mse));
    let (x_lo, x_hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.value), b.max(r.value)));
    let pad = if x_hi > x_lo { 0.05 * (x_hi - x_lo) } else { 0.5 };

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let colors = [BLUE, RED, GREEN];
    let series = |chart_rows: &[AggregateRow], m| -> Vec<(f64, f64)> {
        chart_rows.iter().filter(|r| r.method == m && r.mean_mse > 0.0).map(|r| (r.value, r.mean_mse)).collect()
    };

    macro_rules! draw {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart.configure_mesh().x_desc(variable.as_str()).y_desc("mean MSE").draw()?;
            for (k, &m) in methods.iter().enumerate() {
                let color = colors[k % colors.len()];
                let points = series(rows, m);
                chart
                    .draw_series(LineSeries::new(points.clone(), color.stroke_width(2)))?
                    .label(m.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
                chart.draw_series(points.into_iter().map(|p| Circle::new(p, 3, color.filled())))?;
            }
            chart.configure_series_labels().background_style(WHITE).border_style(BLACK).draw()?;
        }};
    }

    let mut builder = ChartBuilder::on(&root);
    builder.margin(20).x_label_area_size(40).y_label_area_size(70);
    if variable == SweepVariable::N {
        let x_range = log_range(rows.iter().map(|r| r.value));
        draw!(builder.build_cartesian_2d(x_range.log_scale(), y_range.log_scale())?);
    } else {
        draw!(builder.build_cartesian_2d(x_lo - pad..x_hi + pad, y_range.log_scale())?);
    }
    root.present()?;
    Ok(())
}

use std::path::Path;

use anyhow::{anyhow, Result};
use hetero_doa::experiment::{Method, SweepRow, SweepVar};
use plotters::prelude::*;

const PALETTE: [RGBColor; 4] = [RGBColor(31, 119, 180), RGBColor(214, 39, 40), RGBColor(44, 160, 44), RGBColor(148, 103, 189)];

fn axis_label(sweep: SweepVar) -> &'static str {
    match sweep {
        SweepVar::Snr => "SNR (dB)",
        SweepVar::Snapshots => "snapshots L",
        SweepVar::Subarrays => "subarrays per group K",
        SweepVar::FdRatio => "FD antenna share",
    }
}

/// RMSE per method and the CRLB on a log-scale axis.
pub fn rmse_svg(rows: &[SweepRow], sweep: SweepVar, path: &Path) -> Result<()> {
    let values = || rows.iter().filter_map(|r| r.rmse_deg).chain(rows.iter().filter_map(|r| r.crlb_deg));
    let lo = values().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let hi = values().fold(0.0f64, f64::max);
    if !lo.is_finite() || hi <= 0.0 {
        return Err(anyhow!("nothing to plot: no positive RMSE or CRLB values"));
    }
    let x_lo = rows.iter().map(|r| r.sweep_value).fold(f64::INFINITY, f64::min);
    let x_hi = rows.iter().map(|r| r.sweep_value).fold(f64::NEG_INFINITY, f64::max);
    let pad = if x_hi > x_lo { 0.0 } else { 1.0 };

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(64)
        .build_cartesian_2d(x_lo - pad..x_hi + pad, (lo / 2.0..hi * 2.0).log_scale())
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc(axis_label(sweep))
        .y_desc("RMSE (deg)")
        .draw()
        .map_err(|e| anyhow!("{e}"))?;

    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.dedup();
    for (i, m) in methods.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.method == *m)
            .filter_map(|r| r.rmse_deg.filter(|v| *v > 0.0).map(|v| (r.sweep_value, v)))
            .collect();
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(|e| anyhow!("{e}"))?
            .label(m.name())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled())))
            .map_err(|e| anyhow!("{e}"))?;
    }

    let first = methods.first().copied();
    let crlb: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| Some(r.method) == first)
        .filter_map(|r| r.crlb_deg.map(|c| (r.sweep_value, c)))
        .collect();
    chart
        .draw_series(LineSeries::new(crlb, BLACK.stroke_width(1)))
        .map_err(|e| anyhow!("{e}"))?
        .label("CRLB")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], BLACK));
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}

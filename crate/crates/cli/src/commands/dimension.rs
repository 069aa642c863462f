//! `boxdim`.

use clap::Args;
use feigenlab::dimension::{
    box_count_with, box_dimension, classification_raster, dyadic_resolutions, BoxCount, CellClass, Square,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{de_param, family_map, parse_param};
use crate::run::{csv_table, num, Outputs};
use crate::CliError;

#[derive(Debug, Args, Serialize)]
pub struct BoxdimFlags {
    #[arg(long, value_parser = parse_param, allow_hyphen_values = true)]
    pub c: Option<[f64; 2]>,
    #[arg(long)]
    pub degree: Option<u32>,
    /// Coarsest grid is `side / 2^kmin`.
    #[arg(long)]
    pub kmin: Option<i32>,
    #[arg(long)]
    pub kmax: Option<i32>,
    #[arg(long)]
    pub side: Option<f64>,
    #[arg(long, value_parser = parse_param, allow_hyphen_values = true)]
    pub center: Option<[f64; 2]>,
    /// Escape horizon `T`; the count is repeated at `2T`.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Subsamples per cell edge.
    #[arg(long)]
    pub subsamples: Option<usize>,
    /// Raster at `side / 2^k` (0 disables it).
    #[arg(long)]
    pub raster_k: Option<i32>,
    /// Count every cell as a boundary cell instead of using the map.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub full_square: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxdimSettings {
    #[serde(deserialize_with = "de_param")]
    pub c: Option<[f64; 2]>,
    pub degree: u32,
    pub kmin: i32,
    pub kmax: i32,
    pub side: f64,
    #[serde(deserialize_with = "de_param")]
    pub center: Option<[f64; 2]>,
    pub horizon: u64,
    pub subsamples: usize,
    pub raster_k: i32,
    pub full_square: bool,
}

impl Default for BoxdimSettings {
    fn default() -> Self {
        Self {
            c: None,
            degree: 2,
            kmin: 6,
            kmax: 11,
            side: 4.0,
            center: None,
            horizon: 5000,
            subsamples: 4,
            raster_k: 9,
            full_square: false,
        }
    }
}

pub fn boxdim(s: &BoxdimSettings) -> Result<Outputs, CliError> {
    let [cx, cy] = s.center.unwrap_or([0.0, 0.0]);
    let window = Square::centered(cx, cy, s.side);
    let resolutions = dyadic_resolutions(s.side, s.kmin, s.kmax);
    if s.full_square {
        let count = box_count_with(window, &resolutions, |_, _, _| CellClass::Boundary)?;
        return finish(s, count, None, None);
    }
    let map = family_map(s.c, s.degree)?;
    let count = box_dimension(&map, window, &resolutions, s.horizon, s.subsamples)?;
    let doubled = box_dimension(&map, window, &resolutions, 2 * s.horizon, s.subsamples)?;
    let raster = (s.raster_k > 0)
        .then(|| classification_raster(&map, window, s.side * 2f64.powi(-s.raster_k), s.horizon, s.subsamples).to_pgm());
    finish(s, count, Some(doubled), raster)
}

fn finish(s: &BoxdimSettings, count: BoxCount, doubled: Option<BoxCount>, raster: Option<Vec<u8>>) -> Result<Outputs, CliError> {
    let rows = count.grid_sizes.iter().zip(&count.counts).enumerate().map(|(i, (eps, n))| {
        let n2 = doubled.as_ref().map(|d| d.counts[i].to_string()).unwrap_or_default();
        vec![num(*eps), n.to_string(), n2]
    });
    let shift = doubled.as_ref().map(|d| d.slope - count.slope);
    let mut summary = format!("box dimension {:.6} ± {:.2e} (R² = {:.6})", count.slope, count.stderr, count.r2);
    if let Some(d) = shift {
        summary.push_str(&format!("; shift at twice the horizon {d:+.2e}"));
    }
    Ok(Outputs {
        csv: Some(csv_table(&["eps", "count", "count_2t"], rows)?),
        json: Some(json!({
            "settings": { "kmin": s.kmin, "kmax": s.kmax, "side": s.side, "horizon": s.horizon },
            "fit": count,
            "fit_2t": doubled,
            "horizon_shift": shift,
        })),
        raster,
        summary,
        ..Outputs::default()
    })
}

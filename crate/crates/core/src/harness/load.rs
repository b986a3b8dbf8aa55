//! Synthetic hourly building load with calendar encodings and weather
//! columns, plus sliding-window retraining.

use std::f64::consts::PI;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::train::TrainConfig;

use super::metrics::{metrics, MetricsRow};
use super::search::fit_model;

pub const HOURS_PER_WEEK: usize = 168;

/// Column names of [`synthetic_load`], in order.
pub const LOAD_FEATURES: [&str; 8] =
    ["dow_cos", "dow_sin", "hour_cos", "hour_sin", "weekend_holiday", "temperature", "irradiance", "wind_speed"];

/// Fixed public holidays as zero-based day of year.
const HOLIDAYS: [usize; 6] = [0, 140, 174, 181, 244, 358];

fn default_day_of_year() -> usize {
    120
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub weeks: usize,
    pub seed: u64,
    /// Zero-based day of year of the first row; that day is a Monday.
    #[serde(default = "default_day_of_year")]
    pub start_day: usize,
    /// Unoccupied base load [kWh].
    #[serde(default = "LoadSpec::default_base")]
    pub base: f64,
    /// Additional load during opening hours [kWh].
    #[serde(default = "LoadSpec::default_occupancy")]
    pub occupancy: f64,
    /// Heating load per degree below 15 °C [kWh].
    #[serde(default = "LoadSpec::default_heating")]
    pub heating: f64,
    /// Cooling load per degree above 22 °C [kWh].
    #[serde(default = "LoadSpec::default_cooling")]
    pub cooling: f64,
    /// On-site generation per W/m² of irradiance [kWh]; net load is clamped at 0.
    #[serde(default = "LoadSpec::default_solar")]
    pub solar: f64,
    /// Standard deviation of the load noise [kWh].
    #[serde(default = "LoadSpec::default_noise")]
    pub noise: f64,
}

impl LoadSpec {
    fn default_base() -> f64 {
        5.0
    }
    fn default_occupancy() -> f64 {
        30.0
    }
    fn default_heating() -> f64 {
        1.2
    }
    fn default_cooling() -> f64 {
        1.8
    }
    fn default_solar() -> f64 {
        0.04
    }
    fn default_noise() -> f64 {
        2.0
    }

    pub fn new(weeks: usize, seed: u64) -> Self {
        Self {
            weeks,
            seed,
            start_day: default_day_of_year(),
            base: Self::default_base(),
            occupancy: Self::default_occupancy(),
            heating: Self::default_heating(),
            cooling: Self::default_cooling(),
            solar: Self::default_solar(),
            noise: Self::default_noise(),
        }
    }
}

fn encode(v: f64, period: f64) -> (f64, f64) {
    let a = 2.0 * PI * v / period;
    ((1.0 + a.cos()) / 2.0, (1.0 + a.sin()) / 2.0)
}

/// Hourly rows with the eight calendar and weather features and a
/// nonnegative kWh label.
pub fn synthetic_load(spec: &LoadSpec) -> Result<Dataset> {
    if spec.weeks == 0 {
        return invalid("at least one week is required");
    }
    let params = [spec.base, spec.occupancy, spec.heating, spec.cooling, spec.solar, spec.noise];
    if params.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return invalid("load parameters must be finite and nonnegative");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n = spec.weeks * HOURS_PER_WEEK;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let (mut temp_dev, mut cloud) = (0.0f64, 1.0f64);
    for t in 0..n {
        let (day, hour) = (t / 24, t % 24);
        let dow = day % 7;
        let doy = (spec.start_day + day) % 365;
        if hour == 0 {
            cloud = rng.random_range(0.3..=1.0);
        }
        let off = dow >= 5 || HOLIDAYS.contains(&doy);
        temp_dev = 0.9 * temp_dev + 1.0 * unit.sample(&mut rng);
        let seasonal = 6.0 - 16.0 * (2.0 * PI * (doy as f64 - 20.0) / 365.0).cos();
        let temp = seasonal + 4.0 * (2.0 * PI * (hour as f64 - 9.0) / 24.0).sin() + temp_dev;
        let sun = (PI * (hour as f64 - 6.0) / 12.0).sin().max(0.0);
        let peak = 650.0 - 250.0 * (2.0 * PI * (doy as f64 - 172.0) / 365.0).cos();
        let irr = sun * peak * cloud;
        let wind = (4.0 + 2.0 * unit.sample(&mut rng)).abs();
        let occupied = !off && (7..19).contains(&hour);
        let cool_share = if occupied { 1.0 } else { 0.3 };
        let load = spec.base
            + if occupied { spec.occupancy } else { 0.0 }
            + spec.heating * (15.0 - temp).max(0.0)
            + spec.cooling * cool_share * (temp - 22.0).max(0.0)
            - spec.solar * irr
            + spec.noise * unit.sample(&mut rng);
        let (dc, ds) = encode(dow as f64, 7.0);
        let (hc, hs) = encode(hour as f64, 24.0);
        rows.push(vec![dc, ds, hc, hs, if off { 1.0 } else { 0.0 }, temp, irr, wind]);
        labels.push(load.max(0.0));
    }
    Dataset::from_rows(&rows, labels)?.with_feature_names(LOAD_FEATURES.iter().map(|s| s.to_string()).collect())
}

/// Consecutive (train, test) row ranges: each test block of `horizon` rows
/// follows the `window` rows before it, stepping by `horizon`.
pub fn sliding_windows(n: usize, window: usize, horizon: usize) -> Vec<(Range<usize>, Range<usize>)> {
    if window == 0 || horizon == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + window < n {
        let end = (start + window + horizon).min(n);
        out.push((start..start + window, start + window..end));
        start += horizon;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub train: Range<usize>,
    pub test: Range<usize>,
    pub metrics: MetricsRow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlidingResult {
    pub windows: Vec<WindowResult>,
    /// Predictions for every forecast row, in row order.
    pub predictions: Vec<f64>,
    /// Metrics over all forecast rows; violations count negative predictions.
    pub overall: MetricsRow,
}

/// Retrains `cfg` on each window and forecasts the following block,
/// in weeks of hourly rows.
pub fn sliding_window_forecast(
    data: &Dataset,
    cfg: &TrainConfig,
    nonnegative: bool,
    window_weeks: usize,
    horizon_weeks: usize,
    max_windows: Option<usize>,
) -> Result<SlidingResult> {
    let mut plan = sliding_windows(data.n(), window_weeks * HOURS_PER_WEEK, horizon_weeks * HOURS_PER_WEEK);
    if let Some(k) = max_windows {
        plan.truncate(k);
    }
    if plan.is_empty() {
        return invalid(format!("{} rows leave no forecast block after a {window_weeks}-week window", data.n()));
    }
    let (mut windows, mut predictions, mut truth) = (Vec::new(), Vec::new(), Vec::new());
    let mut feats = Vec::new();
    for (tr, te) in plan {
        let train = data.subset(&tr.clone().collect::<Vec<_>>())?;
        let test = data.subset(&te.clone().collect::<Vec<_>>())?;
        let model = fit_model(&train, cfg, nonnegative)?;
        let pred = model.predict_all(&test);
        let pc = crate::train::PhysicsConstraints::nonnegative(test.n());
        let m = metrics(test.labels(), &pred, Some((&pc, &test)))?;
        predictions.extend_from_slice(&pred);
        truth.extend_from_slice(test.labels());
        feats.push(test);
        windows.push(WindowResult { train: tr, test: te, metrics: m });
    }
    let mut all = feats[0].clone();
    for f in &feats[1..] {
        all = all.concat(f)?;
    }
    let pc = crate::train::PhysicsConstraints::nonnegative(all.n());
    let overall = metrics(&truth, &predictions, Some((&pc, &all)))?;
    Ok(SlidingResult { windows, predictions, overall })
}

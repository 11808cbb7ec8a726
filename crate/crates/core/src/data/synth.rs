use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

use super::frame::{ColumnData, SeriesFrame};
use super::schema::{ColumnRole, ColumnSpec, Schema};

pub const MIN_SYNTH_ROWS: usize = 100;
pub const DEFAULT_LOCATIONS: usize = 12;
const SEASONS: [&str; 4] = ["Winter", "Spring", "Summer", "Fall"];
/// Daylight samples per synthetic day, hourly from 08:00.
const SAMPLES_PER_DAY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n: usize,
    #[serde(default = "default_locations")]
    pub locations: usize,
    /// Multiplier on the power-output noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_locations() -> usize {
    DEFAULT_LOCATIONS
}

fn default_noise() -> f64 {
    1.0
}

impl SynthConfig {
    pub fn new(seed: u64, n: usize) -> Self {
        Self {
            seed,
            n,
            locations: DEFAULT_LOCATIONS,
            noise: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < MIN_SYNTH_ROWS {
            return Err(Error::invalid(format!(
                "synthetic series needs n >= {MIN_SYNTH_ROWS}, got {}",
                self.n
            )));
        }
        if self.locations == 0 {
            return Err(Error::invalid("synthetic series needs at least one location"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::invalid(format!("noise multiplier {} must be >= 0", self.noise)));
        }
        Ok(())
    }
}

pub fn location_name(k: usize) -> String {
    format!("Site{:02}", k + 1)
}

/// Schema of the generated frame.
pub fn synth_schema(locations: usize) -> Schema {
    let names: Vec<String> = (0..locations).map(location_name).collect();
    let mut location = ColumnSpec::new("Location", ColumnRole::Categorical, "");
    location.categories = names;
    Schema::new(vec![
        ColumnSpec::new("Timestamp", ColumnRole::Timestamp, "h"),
        location,
        ColumnSpec::categorical("Season", &SEASONS),
        ColumnSpec::new("Hour", ColumnRole::Numeric, "h"),
        ColumnSpec::new("Humidity", ColumnRole::Numeric, "%"),
        ColumnSpec::new("AmbientTemp", ColumnRole::Numeric, "degC"),
        ColumnSpec::new("Wind.Speed", ColumnRole::Numeric, "km/h"),
        ColumnSpec::new("Visibility", ColumnRole::Numeric, "km"),
        ColumnSpec::new("Pressure", ColumnRole::Numeric, "mbar"),
        ColumnSpec::new("Cloud.Ceiling", ColumnRole::Numeric, "100 ft"),
        ColumnSpec::new("PolyPwr", ColumnRole::Target, "W"),
    ])
    .expect("synthetic schema is valid")
}

/// Deterministic PV-like series: a clipped diurnal power curve modulated by a persistent
/// cloud process, seasonal drift and a per-location gain, with weather covariates that
/// track the cloud cover. Equal configs give bit-identical frames.
pub fn synthesize(cfg: &SynthConfig) -> Result<SeriesFrame> {
    cfg.validate()?;
    let mut rng = SeededRng::new(cfg.seed, 0x5947);
    let n = cfg.n;
    let mut stamp = Vec::with_capacity(n);
    let mut location = Vec::with_capacity(n);
    let mut season = Vec::with_capacity(n);
    let mut hour_col = Vec::with_capacity(n);
    let mut humidity = Vec::with_capacity(n);
    let mut temp = Vec::with_capacity(n);
    let mut wind = Vec::with_capacity(n);
    let mut visibility = Vec::with_capacity(n);
    let mut pressure = Vec::with_capacity(n);
    let mut ceiling = Vec::with_capacity(n);
    let mut power = Vec::with_capacity(n);

    let mut cloud: f64 = 0.4;
    for i in 0..n {
        let day = i / SAMPLES_PER_DAY;
        let hour = 8 + (i % SAMPLES_PER_DAY);
        let doy = (day % 365) as f64;
        let k = rng.below(cfg.locations);
        let site_gain = if cfg.locations == 1 {
            1.0
        } else {
            0.85 + 0.3 * k as f64 / (cfg.locations - 1) as f64
        };
        cloud = (0.9 * cloud + 0.04 + 0.1 * rng.normal()).clamp(0.0, 1.0);
        let seasonal = 1.0 + 0.2 * (2.0 * PI * (doy - 172.0) / 365.0).cos();
        let diurnal = (PI * (hour as f64 - 6.0) / 12.0).sin().max(0.0);

        let t = 29.0 + 8.0 * (2.0 * PI * (doy - 200.0) / 365.0).cos() + 4.0 * (diurnal - 0.74) - 3.0 * (cloud - 0.4)
            + 1.5 * rng.normal();
        let h = (37.0 + 25.0 * (cloud - 0.4) - 1.2 * (t - 29.0) + 8.0 * rng.normal()).clamp(0.0, 100.0);
        let w = (10.0 + 4.0 * rng.normal()).abs();
        let vis = if cloud > 0.8 && rng.uniform() < 0.5 {
            10.0 * rng.uniform()
        } else {
            10.0
        };
        let p = 926.0 + 35.0 * rng.normal() - 15.0 * cloud;
        let ceil = if cloud < 0.5 {
            722.0
        } else {
            722.0 * 2.0 * (1.0 - cloud)
        };
        let pw = 23.0 * diurnal * (1.0 - 0.6 * cloud) * seasonal * site_gain + 1.5 * cfg.noise * rng.normal();

        stamp.push((day * 24 + hour) as f64);
        location.push(location_name(k));
        season.push(SEASONS[((doy as usize + 10) / 91) % 4].to_string());
        hour_col.push(hour as f64);
        humidity.push(h);
        temp.push(t);
        wind.push(w);
        visibility.push(vis);
        pressure.push(p);
        ceiling.push(ceil);
        power.push(pw.max(0.0));
    }
    SeriesFrame::new(
        synth_schema(cfg.locations),
        vec![
            ColumnData::Numeric(stamp),
            ColumnData::Categorical(location),
            ColumnData::Categorical(season),
            ColumnData::Numeric(hour_col),
            ColumnData::Numeric(humidity),
            ColumnData::Numeric(temp),
            ColumnData::Numeric(wind),
            ColumnData::Numeric(visibility),
            ColumnData::Numeric(pressure),
            ColumnData::Numeric(ceiling),
            ColumnData::Numeric(power),
        ],
    )
}

//! Exogenous inputs: seasonal electricity prices, solar irradiance and the
//! plant load schedule, sliced onto any control grid.
//!
//! All sources are hourly. Slices use zero-order hold: every control step takes
//! the value of the hour covering its start time. Forecasts are perfect
//! foresight.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Days per simulated year; the season calendar wraps after this.
pub const DAYS_PER_YEAR: usize = 365;

/// Control step lengths (hours) accepted by [`Forecasts::slice`].
pub const SUPPORTED_DT: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Fall,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Winter, Season::Spring, Season::Summer, Season::Fall];

    /// Season of a zero-based calendar day, using fixed boundaries at days 91, 182 and 273.
    pub fn from_day(day: usize) -> Season {
        match day % DAYS_PER_YEAR {
            0..=90 => Season::Winter,
            91..=181 => Season::Spring,
            182..=272 => Season::Summer,
            _ => Season::Fall,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Season::Winter => "winter",
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Fall => "fall",
        }
    }

    fn parse(s: &str) -> Option<Season> {
        Season::ALL
            .into_iter()
            .find(|season| season.name().eq_ignore_ascii_case(s.trim()))
    }
}

/// Hourly electricity prices (USD/kWh) for one season.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceProfile {
    pub season: Season,
    pub hourly_price: [f64; 24],
}

impl PriceProfile {
    pub fn new(season: Season, hourly_price: [f64; 24]) -> Result<Self> {
        if let Some((hour, p)) = hourly_price
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::validation(format!(
                "{} price at hour {hour} must be positive, got {p}",
                season.name()
            )));
        }
        Ok(Self {
            season,
            hourly_price,
        })
    }
}

/// The four seasonal profiles, indexed by [`Season::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalPrices {
    profiles: Vec<PriceProfile>,
}

impl SeasonalPrices {
    /// Requires exactly one profile per season, in any order.
    pub fn new(profiles: Vec<PriceProfile>) -> Result<Self> {
        if profiles.len() != 4 {
            return Err(Error::validation(format!(
                "expected 4 seasonal price profiles, got {}",
                profiles.len()
            )));
        }
        let mut ordered: Vec<Option<PriceProfile>> = vec![None, None, None, None];
        for profile in profiles {
            let slot = &mut ordered[profile.season.index()];
            if slot.is_some() {
                return Err(Error::validation(format!(
                    "duplicate price profile for {}",
                    profile.season.name()
                )));
            }
            *slot = Some(profile);
        }
        Ok(Self {
            profiles: ordered.into_iter().map(|p| p.expect("4 distinct seasons")).collect(),
        })
    }

    /// Built-in stand-in for the seasonal tariff: winter is cheapest before dawn,
    /// the other seasons are cheapest around midday, all seasons peak in the evening.
    pub fn synthetic() -> Self {
        #[rustfmt::skip]
        const TABLE: [[f64; 24]; 4] = [
            [0.095, 0.090, 0.088, 0.088, 0.090, 0.098, 0.125, 0.150, 0.172, 0.168, 0.152, 0.148,
             0.155, 0.158, 0.160, 0.165, 0.220, 0.265, 0.280, 0.270, 0.235, 0.180, 0.140, 0.115],
            [0.118, 0.112, 0.110, 0.110, 0.114, 0.122, 0.140, 0.155, 0.130, 0.105, 0.075, 0.060,
             0.052, 0.050, 0.058, 0.075, 0.130, 0.220, 0.290, 0.310, 0.270, 0.200, 0.150, 0.128],
            [0.122, 0.116, 0.112, 0.112, 0.116, 0.124, 0.138, 0.148, 0.125, 0.100, 0.070, 0.058,
             0.050, 0.048, 0.055, 0.072, 0.140, 0.260, 0.350, 0.380, 0.330, 0.240, 0.170, 0.135],
            [0.120, 0.115, 0.112, 0.112, 0.115, 0.123, 0.142, 0.158, 0.140, 0.115, 0.088, 0.075,
             0.068, 0.066, 0.072, 0.090, 0.150, 0.240, 0.300, 0.310, 0.270, 0.200, 0.155, 0.130],
        ];
        let profiles = Season::ALL
            .iter()
            .map(|&s| PriceProfile::new(s, TABLE[s.index()]).expect("built-in prices are positive"))
            .collect();
        Self::new(profiles).expect("one profile per season")
    }

    pub fn profile(&self, season: Season) -> &PriceProfile {
        &self.profiles[season.index()]
    }

    pub fn profiles(&self) -> &[PriceProfile] {
        &self.profiles
    }
}

/// Hourly global horizontal irradiance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    timestamps: Vec<f64>,
    ghi: Vec<f64>,
}

impl WeatherSeries {
    pub fn new(timestamps: Vec<f64>, ghi: Vec<f64>) -> Result<Self> {
        if timestamps.len() != ghi.len() {
            return Err(Error::DimensionMismatch {
                expected: timestamps.len(),
                found: ghi.len(),
            });
        }
        if timestamps.len() < 2 {
            return Err(Error::validation("weather series needs at least two samples"));
        }
        if let Some((i, g)) = ghi.iter().enumerate().find(|(_, g)| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::validation(format!(
                "irradiance at sample {i} must be non-negative, got {g}"
            )));
        }
        let expected = timestamps[1] - timestamps[0];
        if !(expected > 0.0) {
            return Err(Error::validation("timestamps must be strictly increasing"));
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - expected).abs() > 1e-9 {
                return Err(Error::NonUniformSpacing {
                    index: i + 1,
                    expected,
                    found: step,
                });
            }
        }
        Ok(Self { timestamps, ghi })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn ghi(&self) -> &[f64] {
        &self.ghi
    }

    pub fn spacing(&self) -> f64 {
        self.timestamps[1] - self.timestamps[0]
    }

    pub fn start(&self) -> f64 {
        self.timestamps[0]
    }

    /// End of coverage: the last sample holds until one spacing after its timestamp.
    pub fn end(&self) -> f64 {
        self.timestamps[self.timestamps.len() - 1] + self.spacing()
    }

    /// Zero-order-hold lookup; `None` outside coverage.
    pub fn value_at(&self, hour: f64) -> Option<f64> {
        if hour < self.start() || hour >= self.end() {
            return None;
        }
        let idx = ((hour - self.start()) / self.spacing() + 1e-9).floor() as usize;
        self.ghi.get(idx.min(self.ghi.len() - 1)).copied()
    }
}

/// Amplitude jitter for synthetic weather: each day's peak is scaled by a
/// uniform draw in `[min_scale, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherJitter {
    pub seed: u64,
    pub min_scale: f64,
}

/// Hourly half-sine irradiance between 06:00 and 18:00, zero at night.
pub fn synth_weather(
    day_count: usize,
    peak_ghi: f64,
    jitter: Option<WeatherJitter>,
) -> Result<WeatherSeries> {
    if day_count == 0 {
        return Err(Error::validation("day_count must be at least 1"));
    }
    if !(peak_ghi > 0.0) {
        return Err(Error::validation("peak_ghi must be positive"));
    }
    let mut rng = jitter.map(|j| ChaCha8Rng::seed_from_u64(j.seed));
    let mut timestamps = Vec::with_capacity(day_count * 24);
    let mut ghi = Vec::with_capacity(day_count * 24);
    for day in 0..day_count {
        let scale = match (&mut rng, jitter) {
            (Some(rng), Some(j)) => rng.random_range(j.min_scale.clamp(0.0, 1.0)..=1.0),
            _ => 1.0,
        };
        for hour in 0..24 {
            timestamps.push((day * 24 + hour) as f64);
            ghi.push(scale * peak_ghi * daylight_shape(hour as f64));
        }
    }
    WeatherSeries::new(timestamps, ghi)
}

/// Unit half-sine over daylight hours; exactly zero at and outside 06:00/18:00.
fn daylight_shape(hour_of_day: f64) -> f64 {
    if hour_of_day <= 6.0 || hour_of_day >= 18.0 {
        0.0
    } else {
        (std::f64::consts::PI * (hour_of_day - 6.0) / 12.0).sin()
    }
}

/// Thermal load demand and its daily activity window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadSchedule {
    /// MW
    pub demand: f64,
    pub active_start: f64,
    pub active_end: f64,
}

impl Default for LoadSchedule {
    fn default() -> Self {
        Self {
            demand: 1.0,
            active_start: 8.0,
            active_end: 20.0,
        }
    }
}

impl LoadSchedule {
    pub fn new(demand: f64, active_start: f64, active_end: f64) -> Result<Self> {
        let schedule = Self {
            demand,
            active_start,
            active_end,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.demand > 0.0) {
            return Err(Error::validation("load demand must be positive"));
        }
        if !(0.0 <= self.active_start && self.active_start < self.active_end && self.active_end <= 24.0) {
            return Err(Error::validation(format!(
                "invalid active window [{}, {})",
                self.active_start, self.active_end
            )));
        }
        Ok(())
    }

    pub fn is_active(&self, hour_of_day: f64) -> bool {
        hour_of_day >= self.active_start && hour_of_day < self.active_end
    }
}

/// How a slice that crosses a season boundary prices the hours past it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonLookahead {
    /// Each hour uses its own calendar season.
    #[default]
    Calendar,
    /// The whole slice uses the season of its origin day.
    HoldOrigin,
}

/// Exogenous inputs resampled onto one control grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSlice {
    /// USD/kWh
    pub prices: Vec<f64>,
    /// W/m²
    pub irradiance: Vec<f64>,
    /// MW, zero outside the active window
    pub load_target: Vec<f64>,
    pub dt: f64,
    pub origin: f64,
}

impl ForecastSlice {
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Hour of day at the start of step `i`.
    pub fn hour_of_day(&self, i: usize) -> f64 {
        (self.origin + i as f64 * self.dt).rem_euclid(24.0)
    }
}

/// All exogenous data needed by a run. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecasts {
    pub prices: SeasonalPrices,
    pub weather: WeatherSeries,
    pub load: LoadSchedule,
    #[serde(default)]
    pub lookahead: SeasonLookahead,
}

impl Forecasts {
    pub fn new(prices: SeasonalPrices, weather: WeatherSeries, load: LoadSchedule) -> Result<Self> {
        load.validate()?;
        Ok(Self {
            prices,
            weather,
            load,
            lookahead: SeasonLookahead::default(),
        })
    }

    pub fn with_lookahead(mut self, lookahead: SeasonLookahead) -> Self {
        self.lookahead = lookahead;
        self
    }

    /// Hours covered by the data, starting at 0.
    pub fn available_hours(&self) -> f64 {
        self.weather.end()
    }

    /// Price at an absolute hour, honouring the lookahead mode relative to `origin`.
    fn price_at(&self, hour: f64, origin: f64) -> f64 {
        let day = (hour / 24.0).floor() as usize;
        let season = match self.lookahead {
            SeasonLookahead::Calendar => Season::from_day(day),
            SeasonLookahead::HoldOrigin => Season::from_day((origin / 24.0).floor() as usize),
        };
        let hour_of_day = (hour.rem_euclid(24.0) + 1e-9).floor() as usize;
        self.prices.profile(season).hourly_price[hour_of_day.min(23)]
    }

    /// Resample the sources onto `h` steps of length `dt` starting at `origin_hour`.
    pub fn slice(&self, origin_hour: f64, dt: f64, h: usize) -> Result<ForecastSlice> {
        if !SUPPORTED_DT.iter().any(|&d| (d - dt).abs() < 1e-12) {
            return Err(Error::validation(format!(
                "unsupported step length {dt} h (expected one of {SUPPORTED_DT:?})"
            )));
        }
        let end = origin_hour + dt * h as f64;
        if origin_hour < self.weather.start() || end > self.available_hours() + 1e-9 {
            return Err(Error::OutOfRange {
                start: origin_hour,
                end,
                available: self.available_hours(),
            });
        }
        let mut prices = Vec::with_capacity(h);
        let mut irradiance = Vec::with_capacity(h);
        let mut load_target = Vec::with_capacity(h);
        for i in 0..h {
            let t = origin_hour + i as f64 * dt;
            prices.push(self.price_at(t, origin_hour));
            irradiance.push(self.weather.value_at(t).ok_or(Error::OutOfRange {
                start: origin_hour,
                end,
                available: self.available_hours(),
            })?);
            load_target.push(if self.load.is_active(t.rem_euclid(24.0)) {
                self.load.demand
            } else {
                0.0
            });
        }
        Ok(ForecastSlice {
            prices,
            irradiance,
            load_target,
            dt,
            origin: origin_hour,
        })
    }

    /// Hourly prices of the calendar day starting at `origin_hour`, as seen by a
    /// controller planning that day.
    pub fn day_prices(&self, origin_hour: f64) -> [f64; 24] {
        let mut out = [0.0; 24];
        for (h, p) in out.iter_mut().enumerate() {
            *p = self.price_at(origin_hour + h as f64, origin_hour);
        }
        out
    }
}

/// Which CSV schema [`load_csv`] expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    /// `season,hour,usd_per_kwh`
    Prices,
    /// `hour,ghi_w_m2`
    Weather,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedSeries {
    Prices(Vec<PriceProfile>),
    Weather(WeatherSeries),
}

const PRICE_HEADER: [&str; 3] = ["season", "hour", "usd_per_kwh"];
const WEATHER_HEADER: [&str; 2] = ["hour", "ghi_w_m2"];

pub fn load_csv(path: impl AsRef<Path>, kind: CsvKind) -> Result<LoadedSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let context = path.display().to_string();
    match kind {
        CsvKind::Prices => parse_prices(&text, &context).map(LoadedSeries::Prices),
        CsvKind::Weather => parse_weather(&text, &context).map(LoadedSeries::Weather),
    }
}

fn csv_records(text: &str, context: &str, header: &[&str]) -> Result<Vec<(u64, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(context, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != header {
        return Err(Error::Parse {
            context: context.to_owned(),
            message: format!("header {found:?} does not match expected {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(context, e))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_owned).collect()));
    }
    Ok(rows)
}

fn parse_err(context: &str, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        context: context.to_owned(),
        message: e.to_string(),
    }
}

fn parse_field<T: std::str::FromStr>(context: &str, line: u64, name: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        context: context.to_owned(),
        message: format!("line {line}: cannot parse {name} from {raw:?}"),
    })
}

fn parse_prices(text: &str, context: &str) -> Result<Vec<PriceProfile>> {
    let mut tables: Vec<Option<[Option<f64>; 24]>> = vec![None; 4];
    for (line, fields) in csv_records(text, context, &PRICE_HEADER)? {
        let season = Season::parse(&fields[0]).ok_or_else(|| Error::Parse {
            context: context.to_owned(),
            message: format!("line {line}: unknown season {:?}", fields[0]),
        })?;
        let hour: usize = parse_field(context, line, "hour", &fields[1])?;
        let price: f64 = parse_field(context, line, "usd_per_kwh", &fields[2])?;
        if hour >= 24 {
            return Err(Error::Parse {
                context: context.to_owned(),
                message: format!("line {line}: hour {hour} outside 0..24"),
            });
        }
        if !(price > 0.0) {
            return Err(Error::validation(format!(
                "line {line}: price must be positive, got {price}"
            )));
        }
        let table = tables[season.index()].get_or_insert([None; 24]);
        if table[hour].replace(price).is_some() {
            return Err(Error::validation(format!(
                "line {line}: duplicate entry for {} hour {hour}",
                season.name()
            )));
        }
    }
    let mut profiles = Vec::new();
    for season in Season::ALL {
        let Some(table) = tables[season.index()] else {
            continue;
        };
        let mut hourly = [0.0; 24];
        for (h, v) in table.iter().enumerate() {
            hourly[h] = v.ok_or_else(|| {
                Error::validation(format!("{} profile is missing hour {h}", season.name()))
            })?;
        }
        profiles.push(PriceProfile::new(season, hourly)?);
    }
    Ok(profiles)
}

fn parse_weather(text: &str, context: &str) -> Result<WeatherSeries> {
    let mut timestamps = Vec::new();
    let mut ghi = Vec::new();
    for (line, fields) in csv_records(text, context, &WEATHER_HEADER)? {
        let t: f64 = parse_field(context, line, "hour", &fields[0])?;
        let g: f64 = parse_field(context, line, "ghi_w_m2", &fields[1])?;
        if !(g >= 0.0) {
            return Err(Error::validation(format!(
                "line {line}: irradiance must be non-negative, got {g}"
            )));
        }
        timestamps.push(t);
        ghi.push(g);
    }
    WeatherSeries::new(timestamps, ghi)
}

pub fn write_prices_csv(path: impl AsRef<Path>, prices: &SeasonalPrices) -> Result<()> {
    let mut out = String::from("season,hour,usd_per_kwh\n");
    for profile in prices.profiles() {
        for (h, p) in profile.hourly_price.iter().enumerate() {
            out.push_str(&format!("{},{h},{p}\n", profile.season.name()));
        }
    }
    write_text(path.as_ref(), &out)
}

pub fn write_weather_csv(path: impl AsRef<Path>, weather: &WeatherSeries) -> Result<()> {
    let mut out = String::from("hour,ghi_w_m2\n");
    for (t, g) in weather.timestamps().iter().zip(weather.ghi()) {
        out.push_str(&format!("{t},{g}\n"));
    }
    write_text(path.as_ref(), &out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn forecasts(days: usize) -> Forecasts {
        let weather = synth_weather(
            days,
            1000.0,
            Some(WeatherJitter {
                seed: 3,
                min_scale: 0.4,
            }),
        )
        .unwrap();
        Forecasts::new(SeasonalPrices::synthetic(), weather, LoadSchedule::default()).unwrap()
    }

    #[test]
    fn season_boundaries() {
        assert_eq!(Season::from_day(0), Season::Winter);
        assert_eq!(Season::from_day(90), Season::Winter);
        assert_eq!(Season::from_day(91), Season::Spring);
        assert_eq!(Season::from_day(182), Season::Summer);
        assert_eq!(Season::from_day(273), Season::Fall);
        assert_eq!(Season::from_day(364), Season::Fall);
        assert_eq!(Season::from_day(365), Season::Winter);
    }

    #[test]
    fn price_csv_roundtrip_gives_four_profiles() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prices.csv");
        let prices = SeasonalPrices::synthetic();
        write_prices_csv(&path, &prices).unwrap();
        let LoadedSeries::Prices(profiles) = load_csv(&path, CsvKind::Prices).unwrap() else {
            panic!("expected prices");
        };
        assert_eq!(profiles.len(), 4);
        assert_eq!(SeasonalPrices::new(profiles).unwrap(), prices);
    }

    #[test]
    fn negative_price_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prices.csv");
        std::fs::write(&path, "season,hour,usd_per_kwh\nwinter,0,-0.01\n").unwrap();
        assert!(matches!(load_csv(&path, CsvKind::Prices), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_row_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prices.csv");
        std::fs::write(&path, "season,hour,usd_per_kwh\nwinter,zero,0.1\n").unwrap();
        assert!(matches!(load_csv(&path, CsvKind::Prices), Err(Error::Parse { .. })));
        std::fs::write(&path, "season,hour,price\nwinter,0,0.1\n").unwrap();
        assert!(matches!(load_csv(&path, CsvKind::Prices), Err(Error::Parse { .. })));
    }

    #[test]
    fn weather_gap_is_non_uniform() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weather.csv");
        let hours: Vec<u32> = (0..200).filter(|&h| h != 100).collect();
        let mut text = String::from("hour,ghi_w_m2\n");
        for h in &hours {
            text.push_str(&format!("{h},0\n"));
        }
        std::fs::write(&path, text).unwrap();
        // Oracle: first pairwise difference that is not 1 h.
        let gap = hours.windows(2).position(|w| w[1] - w[0] != 1).unwrap() + 1;
        match load_csv(&path, CsvKind::Weather) {
            Err(Error::NonUniformSpacing { index, found, .. }) => {
                assert_eq!(index, gap);
                assert_eq!(found, 2.0);
            }
            other => panic!("expected spacing error, got {other:?}"),
        }
    }

    #[test]
    fn negative_irradiance_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weather.csv");
        std::fs::write(&path, "hour,ghi_w_m2\n0,0\n1,-3\n").unwrap();
        assert!(matches!(load_csv(&path, CsvKind::Weather), Err(Error::Validation(_))));
    }

    #[test]
    fn synthetic_weather_shape() {
        let w = synth_weather(1, 1000.0, None).unwrap();
        assert_eq!(w.value_at(12.0), Some(1000.0));
        assert_eq!(w.value_at(2.0), Some(0.0));
        assert_eq!(w.value_at(6.0), Some(0.0));
        assert_eq!(w.value_at(18.0), Some(0.0));
    }

    #[test]
    fn synthetic_weather_positive_count() {
        let w = synth_weather(2, 800.0, None).unwrap();
        // Oracle: hourly grid points strictly inside (06:00, 18:00).
        let expected = 2 * (0..24).filter(|&h| h > 6 && h < 18).count();
        assert_eq!(w.ghi().iter().filter(|&&g| g > 0.0).count(), expected);
    }

    #[test]
    fn synthetic_weather_jitter_is_seeded() {
        let j = Some(WeatherJitter {
            seed: 11,
            min_scale: 0.3,
        });
        assert_eq!(synth_weather(5, 900.0, j).unwrap(), synth_weather(5, 900.0, j).unwrap());
        let other = Some(WeatherJitter {
            seed: 12,
            min_scale: 0.3,
        });
        assert_ne!(synth_weather(5, 900.0, j).unwrap(), synth_weather(5, 900.0, other).unwrap());
    }

    #[test]
    fn two_hour_slice_repeats_covering_hour() {
        let f = forecasts(3);
        let s = f.slice(0.0, 2.0, 24).unwrap();
        assert_eq!(s.prices.len(), 24);
        let winter = &f.prices.profile(Season::Winter).hourly_price;
        for (i, p) in s.prices.iter().enumerate() {
            assert_eq!(*p, winter[(2 * i) % 24]);
        }
    }

    #[test]
    fn half_hour_slice_load_window() {
        let f = forecasts(3);
        let s = f.slice(8.0, 0.5, 48).unwrap();
        assert!(s.load_target[..24].iter().all(|&l| l == 1.0));
        assert!(s.load_target[24..].iter().all(|&l| l == 0.0));
        assert_eq!(s.irradiance.len(), 48);
    }

    #[test]
    fn season_boundary_mid_slice() {
        let f = forecasts(93);
        let origin = 90.0 * 24.0 + 12.0;
        let s = f.slice(origin, 1.0, 24).unwrap();
        // Oracle: hour index at which the absolute time reaches day 91.
        let boundary = (91.0 * 24.0 - origin) as usize;
        let winter = &f.prices.profile(Season::Winter).hourly_price;
        let spring = &f.prices.profile(Season::Spring).hourly_price;
        for (i, p) in s.prices.iter().enumerate() {
            let hod = (12 + i) % 24;
            let expected = if i < boundary { winter[hod] } else { spring[hod] };
            assert_eq!(*p, expected, "index {i}");
        }
        let held = f.clone().with_lookahead(SeasonLookahead::HoldOrigin);
        let s = held.slice(origin, 1.0, 24).unwrap();
        assert!(s.prices.iter().enumerate().all(|(i, p)| *p == winter[(12 + i) % 24]));
    }

    #[test]
    fn out_of_range_and_bad_dt() {
        let f = forecasts(2);
        assert!(matches!(f.slice(24.0, 1.0, 25), Err(Error::OutOfRange { .. })));
        assert!(f.slice(24.0, 1.0, 24).is_ok());
        assert!(f.slice(0.0, 0.25, 4).is_err());
        assert!(f.slice(-1.0, 1.0, 4).is_err());
    }

    #[test]
    fn load_schedule_validation() {
        assert!(LoadSchedule::new(0.0, 8.0, 20.0).is_err());
        assert!(LoadSchedule::new(1.0, 20.0, 8.0).is_err());
        assert!(LoadSchedule::new(1.0, 0.0, 24.0).is_ok());
    }

    proptest! {
        #[test]
        fn slicing_is_idempotent_in_dt(origin in 0u32..96, h in 1usize..48) {
            let f = forecasts(6);
            let coarse = f.slice(origin as f64, 1.0, h).unwrap();
            let fine = f.slice(origin as f64, 0.5, 2 * h).unwrap();
            let upsample = |v: &[f64]| v.iter().flat_map(|&x| [x, x]).collect::<Vec<_>>();
            prop_assert_eq!(upsample(&coarse.prices), fine.prices);
            prop_assert_eq!(upsample(&coarse.irradiance), fine.irradiance);
            prop_assert_eq!(upsample(&coarse.load_target), fine.load_target);
        }

        #[test]
        fn adjacent_slices_concatenate(origin in 0u32..48, a in 1usize..24, b in 1usize..24, dt_idx in 0usize..3) {
            let f = forecasts(6);
            let dt = SUPPORTED_DT[dt_idx];
            let o = origin as f64;
            let first = f.slice(o, dt, a).unwrap();
            let second = f.slice(o + dt * a as f64, dt, b).unwrap();
            let whole = f.slice(o, dt, a + b).unwrap();
            prop_assert_eq!([first.prices, second.prices].concat(), whole.prices);
            prop_assert_eq!([first.irradiance, second.irradiance].concat(), whole.irradiance);
            prop_assert_eq!([first.load_target, second.load_target].concat(), whole.load_target);
        }

        #[test]
        fn synthetic_weather_zero_at_night(days in 1usize..10, peak in 1.0f64..1500.0, seed in 0u64..100) {
            let w = synth_weather(days, peak, Some(WeatherJitter { seed, min_scale: 0.2 })).unwrap();
            for (t, g) in w.timestamps().iter().zip(w.ghi()) {
                let hod = t.rem_euclid(24.0);
                prop_assert!(*g >= 0.0);
                if hod <= 6.0 || hod >= 18.0 {
                    prop_assert_eq!(*g, 0.0);
                }
            }
        }
    }
}

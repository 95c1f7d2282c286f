//! Day planning and sensor event synthesis.
//!
//! [`plan_day`] decides what the subject does on one local day: where they
//! are at every second, when they sleep and in which phase, and every
//! interaction with a sensorized object. [`generate_day`] turns that plan into
//! the events the installed devices would report.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use carewatch_core::{
    BinaryState, DeviceKind, DeviceSpec, Floorplan, HomeConfig, HomeRef, LocationFix, Payload, RoomId, SensorEvent,
    SleepPhase, SubjectProfile, TargetObject, Timestamp, Unit,
};

use crate::sched::{TestInput, TestSchedule};
use crate::script::{BehaviorScript, Meal, MealPlan, SleepPlan};
use crate::seed::{grid_offset, home_seed, stream, Stream};
use crate::simulate::SimError;

/// Seconds spent crossing an intermediate room.
const TRANSIT_S: i64 = 20;
const STOVE_RISE_C: f64 = 8.0;
const STOVE_TAU_S: f64 = 20.0 * 60.0;
const SHOWER_RISE_PCT: f64 = 25.0;
const SHOWER_TAU_S: f64 = 15.0 * 60.0;
const AMBIENT_C: f64 = 21.0;
const AMBIENT_RH: f64 = 50.0;
const MICROWAVE_W: f64 = 1000.0;
const STANDBY_W: f64 = 1.5;
const TABLET_REPEAT_S: i64 = 20 * 60;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Place {
    Room(RoomId),
    Outside,
}

impl Place {
    pub fn room(&self) -> Option<&RoomId> {
        match self {
            Place::Room(r) => Some(r),
            Place::Outside => None,
        }
    }
}

/// The subject at one place over `[start, end)`. `still` marks lying in bed,
/// when motion sensors do not retrigger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stay {
    pub start: Timestamp,
    pub end: Timestamp,
    pub place: Place,
    pub still: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MealChoice {
    Hot,
    EatOut,
    Cold,
}

/// Ground truth of one simulated local day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPlan {
    pub date: NaiveDate,
    pub range: (Timestamp, Timestamp),
    /// Leaving bed in the morning.
    pub wake: Timestamp,
    /// Lying down in the evening.
    pub bed: Timestamp,
    /// Contiguous, covering `range`.
    pub stays: Vec<Stay>,
    /// Start of every in-bed minute inside `range` with its sleep phase.
    pub sleep: Vec<(Timestamp, SleepPhase)>,
    pub meals: Vec<(Meal, MealChoice)>,
    pub cooking: Vec<(Meal, Timestamp, Timestamp)>,
    pub microwave: Vec<(Timestamp, Timestamp)>,
    pub showers: Vec<(Timestamp, Timestamp)>,
    pub brushings: Vec<(Timestamp, u32)>,
    pub openings: Vec<(Timestamp, TargetObject)>,
    /// Door opening on leaving to door opening on return.
    pub outings: Vec<(Timestamp, Timestamp)>,
    pub medicine_taken: u32,
    /// Multiplier applied to outing probabilities on this date.
    pub seasonal_factor: f64,
}

impl DayPlan {
    pub fn place_at(&self, t: Timestamp) -> Option<&Stay> {
        let i = self.stays.partition_point(|s| s.end <= t);
        self.stays.get(i).filter(|s| s.start <= t)
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> i64 {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

fn normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return mean;
    }
    Normal::new(mean, sd).map(|d| d.sample(rng)).unwrap_or(mean)
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (v * k).round() / k
}

/// Room paths of a floorplan, with the way out through the entrance.
struct Geometry<'a> {
    paths: BTreeMap<(&'a RoomId, &'a RoomId), Vec<RoomId>>,
    entrance: RoomId,
}

impl<'a> Geometry<'a> {
    fn new(fp: &'a Floorplan, entrance: RoomId) -> Self {
        let mut paths = BTreeMap::new();
        for a in &fp.rooms {
            for b in &fp.rooms {
                let p = fp.path(&a.id, &b.id).unwrap_or_else(|| vec![a.id.clone(), b.id.clone()]);
                paths.insert((&a.id, &b.id), p);
            }
        }
        Self { paths, entrance }
    }

    /// Rooms crossed strictly between `from` and `to`.
    fn between(&self, from: &Place, to: &Place) -> Vec<RoomId> {
        let inner = |a: &RoomId, b: &RoomId| -> Vec<RoomId> {
            match self.paths.get(&(a, b)) {
                Some(p) if p.len() > 2 => p[1..p.len() - 1].to_vec(),
                _ => Vec::new(),
            }
        };
        match (from, to) {
            (Place::Room(a), Place::Room(b)) => inner(a, b),
            (Place::Room(a), Place::Outside) => {
                let mut v = inner(a, &self.entrance);
                if *a != self.entrance {
                    v.push(self.entrance.clone());
                }
                v
            }
            (Place::Outside, Place::Room(b)) => {
                let mut v = if *b != self.entrance { vec![self.entrance.clone()] } else { vec![] };
                v.extend(inner(&self.entrance, b));
                v
            }
            (Place::Outside, Place::Outside) => Vec::new(),
        }
    }

    fn transit_s(&self, from: &Place, to: &Place) -> i64 {
        self.between(from, to).len() as i64 * TRANSIT_S
    }
}

/// Builds a contiguous sequence of stays.
struct Track<'g, 'a> {
    geo: &'g Geometry<'a>,
    stays: Vec<Stay>,
    now: Timestamp,
    place: Place,
}

impl<'g, 'a> Track<'g, 'a> {
    fn new(geo: &'g Geometry<'a>, now: Timestamp, place: Place) -> Self {
        Self { geo, stays: Vec::new(), now, place }
    }

    fn stay_until(&mut self, until: Timestamp, still: bool) {
        if until <= self.now {
            return;
        }
        match self.stays.last_mut() {
            Some(last) if last.end == self.now && last.place == self.place && last.still == still => {
                last.end = until;
            }
            _ => self.stays.push(Stay { start: self.now, end: until, place: self.place.clone(), still }),
        }
        self.now = until;
    }

    fn go(&mut self, to: &Place) {
        if *to == self.place {
            return;
        }
        for room in self.geo.between(&self.place, to) {
            self.place = Place::Room(room);
            let t = self.now + TRANSIT_S;
            self.stay_until(t, false);
        }
        self.place = to.clone();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Act {
    Open(TargetObject),
    Cook(Meal, i64),
    Microwave(i64),
    Shower(i64),
    Brush(u32),
    Leave,
    Return,
    Medicine,
}

/// A planned activity: a sequence of places and the object interactions at
/// offsets from its start.
#[derive(Debug, Clone)]
struct Block {
    start: Timestamp,
    segments: Vec<(Place, i64)>,
    acts: Vec<(i64, Act)>,
}

impl Block {
    fn len(&self) -> i64 {
        self.segments.iter().map(|(_, d)| d).sum()
    }

    fn end(&self) -> Timestamp {
        self.start + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BedMinute {
    In(SleepPhase),
    Out,
}

/// One night, from lying down to getting up.
struct NightPlan {
    bed: Timestamp,
    wake: Timestamp,
    minutes: Vec<BedMinute>,
    stays: Vec<Stay>,
}

fn apportion(total: i64, weights: &[f64]) -> Vec<i64> {
    let sum: f64 = weights.iter().sum();
    if total <= 0 || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<i64> = quotas.iter().map(|q| q.floor() as i64).collect();
    let mut rest = total - out.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for i in order {
        if rest == 0 {
            break;
        }
        out[i] += 1;
        rest -= 1;
    }
    out
}

fn plan_night(
    home: &HomeConfig,
    script: &BehaviorScript,
    s: &SleepPlan,
    geo: &Geometry,
    date: NaiveDate,
    seed: u64,
) -> NightPlan {
    let mut rng = stream(seed, date, Stream::Night);
    let clock = home.clock;
    let bed_min = normal(&mut rng, s.bed_minute, s.bed_sd_minutes)
        .clamp(s.bed_minute - 2.0 * s.bed_sd_minutes, s.bed_minute + 2.0 * s.bed_sd_minutes)
        .clamp(18.0 * 60.0, 23.0 * 60.0 + 50.0);
    let wake_min = normal(&mut rng, s.wake_minute, s.wake_sd_minutes)
        .clamp(s.wake_minute - 2.0 * s.wake_sd_minutes, s.wake_minute + 2.0 * s.wake_sd_minutes)
        .clamp(4.0 * 60.0 + 30.0, 11.0 * 60.0);
    let bed = clock.at_minute(date, bed_min.round() as i64);
    let wake = clock.at_minute(date, 1440 + wake_min.round() as i64);
    let n = ((wake - bed) / 60) as usize;

    let latency = uniform(&mut rng, 5, 20) as usize;
    let final_awake = uniform(&mut rng, 1, 3) as usize;
    let deep_f = normal(&mut rng, s.deep_fraction, s.fraction_sd).clamp(0.02, 0.45);
    let rem_f = normal(&mut rng, s.rem_fraction, s.fraction_sd).clamp(0.02, 0.45);
    let asleep = n.saturating_sub(latency + final_awake);
    let cycles = ((asleep as f64 / 90.0).round() as usize).max(1);
    let base = asleep / cycles;
    let lens: Vec<i64> = (0..cycles).map(|i| (base + usize::from(i < asleep % cycles)) as i64).collect();
    let deep_w: Vec<f64> = (0..cycles).map(|i| (1.0 - 0.2 * i as f64).max(0.1)).collect();
    let rem_w: Vec<f64> = (0..cycles).map(|i| 0.4 + 0.3 * i as f64).collect();
    let deep = apportion((deep_f * asleep as f64).round() as i64, &deep_w);
    let rem = apportion((rem_f * asleep as f64).round() as i64, &rem_w);

    let mut minutes = Vec::with_capacity(n);
    minutes.extend(std::iter::repeat_n(BedMinute::In(SleepPhase::Awake), latency));
    for i in 0..cycles {
        let room = (lens[i] - 5).max(0);
        let d = deep[i].min(room);
        let r = rem[i].min(room - d);
        let light = lens[i] - d - r;
        let first = light / 2;
        for (phase, k) in [
            (SleepPhase::Light, first),
            (SleepPhase::Deep, d),
            (SleepPhase::Light, light - first),
            (SleepPhase::Rem, r),
        ] {
            minutes.extend(std::iter::repeat_n(BedMinute::In(phase), k as usize));
        }
    }
    minutes.resize(n, BedMinute::In(SleepPhase::Awake));

    let lo = latency + 10;
    let hi = n.saturating_sub(final_awake + 10);
    for _ in 0..poisson(&mut rng, s.awakenings_per_night) {
        let at = uniform(&mut rng, lo as i64, hi as i64) as usize;
        let len = uniform(&mut rng, 2, 6) as usize;
        for m in minutes.iter_mut().skip(at).take(len) {
            *m = BedMinute::In(SleepPhase::Awake);
        }
    }

    // Excursions out of bed: bathroom trips, then aimless wandering.
    let bedroom = Place::Room(script.anchors.bedroom.clone());
    let getups = poisson(&mut rng, s.getups_per_night);
    let wanders = poisson(&mut rng, s.wanderings_per_night);
    let mut excursions: Vec<(usize, Vec<(Place, i64)>)> = Vec::new();
    for k in 0..getups + wanders {
        let at = uniform(&mut rng, (latency + 15) as i64, n.saturating_sub(final_awake + 45) as i64) as usize;
        let mut route: Vec<(Place, i64)> = vec![(bedroom.clone(), 30)];
        if k < getups {
            route.push((Place::Room(script.anchors.bathroom.clone()), uniform(&mut rng, 150, 420)));
        } else {
            let mut cur = script.anchors.bedroom.clone();
            for _ in 0..uniform(&mut rng, 2, 4) {
                let next: Vec<&RoomId> = home.floorplan.neighbours(&cur).collect();
                if next.is_empty() {
                    break;
                }
                cur = next[rng.random_range(0..next.len())].clone();
                route.push((Place::Room(cur.clone()), uniform(&mut rng, 120, 300)));
            }
        }
        route.push((bedroom.clone(), 30));
        excursions.push((at, route));
    }
    excursions.sort_by_key(|(at, _)| *at);

    let mut stays_track = Track::new(geo, bed, bedroom.clone());
    let mut busy_until = 0usize;
    for (at, route) in excursions {
        let mut secs = 0i64;
        let mut prev = bedroom.clone();
        for (p, d) in &route {
            secs += geo.transit_s(&prev, p) + d;
            prev = p.clone();
        }
        let len = ((secs + 59) / 60) as usize;
        if at < busy_until + 5 || at < 2 || at + len + 1 >= n {
            continue;
        }
        busy_until = at + len + 1;
        for m in &mut minutes[at - 2..at] {
            *m = BedMinute::In(SleepPhase::Awake);
        }
        for m in &mut minutes[at..at + len] {
            *m = BedMinute::Out;
        }
        minutes[at + len] = BedMinute::In(SleepPhase::Awake);

        let t0 = bed + at as i64 * 60;
        let t1 = t0 + len as i64 * 60;
        stays_track.stay_until(t0, true);
        let mut t = t0;
        let last = route.len() - 1;
        for (i, (p, d)) in route.into_iter().enumerate() {
            stays_track.go(&p);
            t = if i == last { t1 } else { stays_track.now.max(t) + d };
            stays_track.stay_until(t, false);
        }
    }
    stays_track.stay_until(wake, true);
    NightPlan { bed, wake, minutes, stays: stays_track.stays }
}

fn seasonal_factor(script: &BehaviorScript, date: NaiveDate) -> f64 {
    let doy = f64::from(date.ordinal());
    1.0 + script.seasonal_amplitude * (2.0 * PI * (doy - 196.0) / 365.25).cos()
}

/// Draws how `plan` is eaten today and the matching block at `start`.
fn meal_block(rng: &mut ChaCha8Rng, script: &BehaviorScript, plan: &MealPlan, start: Timestamp) -> (MealChoice, Block) {
    let a = &script.anchors;
    let u: f64 = rng.random();
    let choice = if u < plan.hot_prob {
        MealChoice::Hot
    } else if u < plan.hot_prob + plan.eat_out_prob {
        MealChoice::EatOut
    } else {
        MealChoice::Cold
    };
    let kitchen = Place::Room(a.kitchen.clone());
    let block = match choice {
        MealChoice::Hot => {
            let cook = uniform(rng, 20, 35) * 60;
            let eat = uniform(rng, 15, 25) * 60;
            Block {
                start,
                segments: vec![(kitchen, 300 + cook + 120), (Place::Room(a.living.clone()), eat)],
                acts: vec![
                    (60, Act::Open(TargetObject::Fridge)),
                    (180, Act::Open(TargetObject::Pantry)),
                    (300, Act::Cook(plan.meal, cook)),
                ],
            }
        }
        MealChoice::EatOut => {
            let out = uniform(rng, 60, 120) * 60;
            outing_block(script, start, out)
        }
        MealChoice::Cold => {
            let eat = uniform(rng, 10, 20) * 60;
            let mut acts = vec![(60, Act::Open(TargetObject::Fridge))];
            if rng.random_bool(plan.microwave_prob) {
                acts.push((180, Act::Microwave(uniform(rng, 2, 4) * 60)));
            }
            Block { start, segments: vec![(kitchen, 480 + eat)], acts }
        }
    };
    (choice, block)
}

fn outing_block(script: &BehaviorScript, start: Timestamp, out_s: i64) -> Block {
    let hall = Place::Room(script.anchors.entrance.clone());
    Block {
        start,
        segments: vec![(hall.clone(), 60), (Place::Outside, out_s), (hall, 60)],
        acts: vec![(60, Act::Leave), (60 + out_s, Act::Return)],
    }
}

fn overlaps(a: &Block, start: Timestamp, end: Timestamp) -> bool {
    // Two minutes of slack leave room for walking between blocks.
    a.start < end + 120 && start < a.end() + 120
}

/// Getting up and going to bed: bathroom and breakfast after waking, then
/// optional brushing and the bedroom before lying down.
fn routine_blocks(rng: &mut ChaCha8Rng, script: &BehaviorScript, wake: Timestamp, bed: Timestamp) -> (Block, Block) {
    let a = &script.anchors;
    let room = |r: &RoomId| Place::Room(r.clone());
    // Morning: bathroom, then breakfast in the kitchen.
    let mut bath_s = uniform(rng, 6, 12) * 60;
    let mut morning_acts = Vec::new();
    let bath_at = 60 + 2 * TRANSIT_S;
    if rng.random_bool(script.hygiene.brush_morning_prob) {
        morning_acts.push((bath_at + 120, Act::Brush(uniform(rng, 60, 150) as u32)));
    }
    if rng.random_bool(script.hygiene.shower_prob) {
        let shower = uniform(rng, 8, 15) * 60;
        morning_acts.push((bath_at + bath_s, Act::Shower(shower)));
        bath_s += shower + 180;
    }
    let breakfast_s = uniform(rng, 15, 25) * 60;
    let kitchen_at = bath_at + bath_s + 2 * TRANSIT_S;
    morning_acts.push((kitchen_at + 60, Act::Open(TargetObject::Fridge)));
    if rng.random_bool(0.5) {
        morning_acts.push((kitchen_at + 150, Act::Open(TargetObject::Pantry)));
    }
    if let Some(b) = script.meal(Meal::Breakfast) {
        if rng.random_bool(b.microwave_prob) {
            morning_acts.push((kitchen_at + 240, Act::Microwave(uniform(rng, 1, 3) * 60)));
        }
    }
    let morning = Block {
        start: wake,
        segments: vec![
            (room(&a.bedroom), 60),
            (room(&a.bathroom), 2 * TRANSIT_S + bath_s),
            (room(&a.kitchen), 2 * TRANSIT_S + breakfast_s),
        ],
        acts: morning_acts,
    };

    // Evening: optional brushing, then the bedroom.
    let mut evening_segments = Vec::new();
    let mut evening_acts = Vec::new();
    if rng.random_bool(script.hygiene.brush_evening_prob) {
        evening_segments.push((room(&a.bathroom), 240));
        evening_acts.push((60, Act::Brush(uniform(rng, 60, 150) as u32)));
    }
    evening_segments.push((room(&a.bedroom), uniform(rng, 2, 5) * 60));
    let evening_len: i64 = evening_segments.iter().map(|(_, d)| d).sum::<i64>() + 2 * TRANSIT_S;
    let evening = Block {
        start: bed - evening_len,
        segments: {
            let mut v = evening_segments;
            v[0].1 += 2 * TRANSIT_S;
            v
        },
        acts: evening_acts,
    };

    (morning, evening)
}

/// Plans local `date`: nights on both sides, daytime blocks and free time.
/// `seed` is the top-level run seed. The script must be valid.
pub fn plan_day(home: &HomeConfig, script: &BehaviorScript, date: NaiveDate, seed: u64) -> DayPlan {
    let hseed = home_seed(seed, home.id.as_str());
    let geo = Geometry::new(&home.floorplan, script.anchors.entrance.clone());
    let range = home.clock.day_range(date);
    let nights = script.sleep.as_ref().map(|s| {
        let before = date.pred_opt().unwrap_or(date);
        (plan_night(home, script, s, &geo, before, hseed), plan_night(home, script, s, &geo, date, hseed))
    });
    let (wake, bed) = nights.as_ref().map_or(range, |(p, n)| (p.wake, n.bed));
    let mut rng = stream(hseed, date, Stream::Day);
    let clock = home.clock;
    let at = |minute: i64| clock.at_minute(date, minute);
    let a = &script.anchors;
    let room = |r: &RoomId| Place::Room(r.clone());
    let season = seasonal_factor(script, date);

    let mut plan = DayPlan {
        date,
        range,
        wake,
        bed,
        stays: Vec::new(),
        sleep: Vec::new(),
        meals: Vec::new(),
        cooking: Vec::new(),
        microwave: Vec::new(),
        showers: Vec::new(),
        brushings: Vec::new(),
        openings: Vec::new(),
        outings: Vec::new(),
        medicine_taken: 0,
        seasonal_factor: season,
    };

    let mut placed: Vec<Block> = Vec::new();
    if nights.is_some() {
        let (morning, evening) = routine_blocks(&mut rng, script, wake, bed);
        placed = vec![morning, evening];
    }
    let free_from = placed.first().map_or(range.0, Block::end);
    let free_until = placed.get(1).map_or(range.1, |b| b.start);
    let mut fixed: Vec<Block> = Vec::new();
    for m in script.meals.iter().filter(|m| m.meal != Meal::Breakfast) {
        let start = at(uniform(&mut rng, i64::from(m.start.0), i64::from(m.start.1)));
        let (choice, block) = meal_block(&mut rng, script, m, start);
        plan.meals.push((m.meal, choice));
        fixed.push(block);
    }
    for o in &script.outings {
        let p = (o.prob * season).clamp(0.0, 1.0);
        let go = rng.random_bool(p);
        let start = at(uniform(&mut rng, i64::from(o.start.0), i64::from(o.start.1)));
        let dur = uniform(&mut rng, i64::from(o.duration.0), i64::from(o.duration.1)) * 60;
        if go {
            fixed.push(outing_block(script, start, dur));
        }
    }
    let mut flexible: Vec<Block> = Vec::new();
    let cabinet_room = home
        .device_for(DeviceKind::MagneticContact, TargetObject::MedicineCabinet)
        .and_then(|d| home.room_of(&d.id))
        .cloned()
        .unwrap_or_else(|| a.kitchen.clone());
    for dose in &script.medicine {
        let jitter = normal(&mut rng, 0.0, 10.0).round() as i64;
        let taken = rng.random_bool(dose.adherence);
        if taken {
            flexible.push(Block {
                start: at(i64::from(dose.minute) + jitter),
                segments: vec![(room(&cabinet_room), 120)],
                acts: vec![(30, Act::Medicine)],
            });
        }
    }
    for _ in 0..poisson(&mut rng, script.snacks_per_day) {
        let start = uniform(&mut rng, wake + 7200, bed - 3600);
        let target = if rng.random_bool(0.6) { TargetObject::Fridge } else { TargetObject::Pantry };
        flexible.push(Block {
            start,
            segments: vec![(room(&a.kitchen), uniform(&mut rng, 3, 6) * 60)],
            acts: vec![(60, Act::Open(target))],
        });
    }

    // Admit blocks: anchors first, then fixed-time blocks, then flexible ones
    // which slide past conflicts by up to 90 minutes.
    fixed.sort_by_key(|b| b.start);
    for b in fixed {
        let (s, e) = (b.start, b.end());
        let inside = s > free_from && e < free_until;
        if inside && !placed.iter().any(|p| overlaps(p, s, e)) {
            placed.push(b);
        }
    }
    flexible.sort_by_key(|b| b.start);
    for mut b in flexible {
        let desired = b.start;
        let len = b.len();
        loop {
            let conflict = placed.iter().filter(|p| overlaps(p, b.start, b.start + len)).map(|p| p.end()).max();
            match conflict {
                None => break,
                Some(end) => b.start = end + 180,
            }
        }
        let ok = b.start - desired <= 90 * 60 && b.start + len < free_until - 120;
        if ok && b.start > free_from {
            placed.push(b);
        }
    }
    placed.sort_by_key(|b| b.start);

    // Walk the day.
    let start_place = match (&nights, script.walk.rooms.first()) {
        (Some(_), _) => room(&a.bedroom),
        (None, Some(r)) => room(r),
        (None, None) => Place::Outside,
    };
    let mut track = Track::new(&geo, wake, start_place);
    let rooms = &script.walk.rooms;
    let dwell = Exp::new(1.0 / script.walk.mean_dwell_minutes.max(1.0)).expect("positive rate");
    for block in &placed {
        let first = &block.segments[0].0;
        // Free time until the block.
        loop {
            let Place::Room(cur) = track.place.clone() else { break };
            let Some(i) = rooms.iter().position(|r| *r == cur) else { break };
            let row = &script.walk.transitions[i];
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut j = row.len() - 1;
            for (k, p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    j = k;
                    break;
                }
            }
            let d = (dwell.sample(&mut rng).clamp(5.0, 60.0) * 60.0).round() as i64;
            let to = room(&rooms[j]);
            let needed = geo.transit_s(&track.place, &to) + d + geo.transit_s(&to, first);
            if track.now + needed > block.start {
                break;
            }
            track.go(&to);
            let t = track.now + d;
            track.stay_until(t, false);
        }
        let arrive = block.start - geo.transit_s(&track.place, first);
        track.stay_until(arrive, false);
        track.go(first);
        let mut t = block.start;
        for (p, d) in &block.segments {
            track.go(p);
            t += d;
            track.stay_until(t, false);
        }
        for &(off, act) in &block.acts {
            let ts = block.start + off;
            match act {
                Act::Open(target) => plan.openings.push((ts, target)),
                Act::Cook(meal, d) => plan.cooking.push((meal, ts, ts + d)),
                Act::Microwave(d) => plan.microwave.push((ts, ts + d)),
                Act::Shower(d) => plan.showers.push((ts, ts + d)),
                Act::Brush(d) => plan.brushings.push((ts, d)),
                Act::Leave => plan.outings.push((ts, ts)),
                Act::Return => {
                    if let Some(o) = plan.outings.last_mut() {
                        o.1 = ts;
                    }
                }
                Act::Medicine => {
                    plan.openings.push((ts, TargetObject::MedicineCabinet));
                    plan.medicine_taken += 1;
                }
            }
        }
    }
    track.stay_until(bed, false);

    // Assemble stays over the whole local day.
    let mut stays: Vec<Stay> = Vec::new();
    let (before, after) = match &nights {
        Some((p, n)) => (&p.stays[..], &n.stays[..]),
        None => (&[][..], &[][..]),
    };
    for s in before.iter().chain(&track.stays).chain(after) {
        let (start, end) = (s.start.max(range.0), s.end.min(range.1));
        if start < end {
            match stays.last_mut() {
                Some(l) if l.end == start && l.place == s.place && l.still == s.still => l.end = end,
                _ => stays.push(Stay { start, end, ..s.clone() }),
            }
        }
    }
    plan.stays = stays;
    for night in nights.iter().flat_map(|(p, n)| [p, n]) {
        for (i, m) in night.minutes.iter().enumerate() {
            let t = night.bed + 60 * i as i64;
            if let (BedMinute::In(phase), true) = (m, (range.0..range.1).contains(&t)) {
                plan.sleep.push((t, *phase));
            }
        }
    }
    plan.openings.sort_by_key(|o| o.0);
    plan
}

fn grid(start: Timestamp, end: Timestamp, device: &DeviceSpec) -> impl Iterator<Item = Timestamp> {
    let interval = i64::from(device.interval_s().unwrap_or(300).max(1));
    let off = grid_offset(device.id.as_str(), interval as u32);
    let first = start + (off - start).rem_euclid(interval);
    (0..).map(move |k| first + k * interval).take_while(move |t| *t < end)
}

fn ramp_decay(t: Timestamp, start: Timestamp, end: Timestamp, amp: f64, tau: f64) -> f64 {
    if t < start {
        0.0
    } else if t < end {
        amp * (t - start) as f64 / (end - start).max(1) as f64
    } else {
        amp * (-((t - end) as f64) / tau).exp()
    }
}

struct Emitter<'a> {
    home: &'a HomeConfig,
    events: Vec<SensorEvent>,
}

impl Emitter<'_> {
    fn push(&mut self, device: &DeviceSpec, timestamp: Timestamp, payload: Payload) {
        self.events.push(SensorEvent {
            device_id: device.id.clone(),
            home_ref: HomeRef::Home(self.home.id.clone()),
            timestamp,
            kind: device.kind,
            payload,
        });
    }

    fn binary(&mut self, device: &DeviceSpec, t: Timestamp, state: BinaryState) {
        self.push(device, t, Payload::Binary(state));
    }
}

/// Events of the weekly test that fall on `date`.
fn test_events(
    home: &HomeConfig,
    script: &BehaviorScript,
    date: NaiveDate,
    seed: u64,
    today: &DayPlan,
    tablet: &DeviceSpec,
    out: &mut Emitter,
) {
    let Some(test) = &script.test else { return };
    let tablet_room = home.room_of(&tablet.id).cloned().unwrap_or_else(|| script.anchors.living.clone());
    let back = (date.weekday().num_days_from_monday() + 7 - test.weekday.num_days_from_monday()) % 7;
    let anchor = date - chrono::Days::new(u64::from(back));
    let (lo, hi) = home.clock.day_range(date);
    let hseed = home_seed(seed, home.id.as_str());
    let mut sched = TestSchedule::new((test.weekday, test.minute));
    let mut outcome = None;
    for k in 0..u64::from(crate::sched::MAX_ATTEMPTS) {
        let slot =
            home.clock.at_minute(anchor, i64::from(test.minute) + (k as i64) * i64::from(test.reschedule_minutes));
        let slot_date = home.clock.local_date(slot);
        if slot_date > date {
            break;
        }
        let other;
        let plan = if slot_date == date {
            today
        } else {
            other = plan_day(home, script, slot_date, seed);
            &other
        };
        let mut rng = stream(hseed, slot_date, Stream::Test);
        let window_end = slot + i64::from(test.presence_window_minutes) * 60;
        let presence = plan
            .stays
            .iter()
            .find(|s| s.place.room() == Some(&tablet_room) && s.end > slot && s.start < window_end)
            .map(|s| s.start.max(slot));
        sched.tick(TestInput::ScheduledTimeReached);
        let confirm = rng.random_bool(test.confirm_prob);
        let score = normal(&mut rng, test.score_mean, test.score_sd).round().clamp(0.0, 100.0) as u8;
        let result = match presence {
            None => sched.tick(TestInput::PresenceWindowElapsed).map(|r| (window_end, r)),
            Some(p) => {
                sched.tick(TestInput::PresenceDetected);
                if confirm {
                    sched.tick(TestInput::ConfirmYes);
                    let done = p + 60 + i64::from(test.duration_minutes) * 60;
                    sched.tick(TestInput::TestFinished(score)).map(|r| (done, r))
                } else {
                    sched.tick(TestInput::ConfirmNo).map(|r| (p + 60, r))
                }
            }
        };
        if let Some(r) = result {
            outcome = Some(r);
            break;
        }
    }
    if let Some((t, (compliant, score))) = outcome {
        if (lo..hi).contains(&t) {
            out.push(tablet, t, Payload::TestOutcome { compliant, score });
        }
    }
}

/// Simulates one local day of `home`. Deterministic in all arguments; `seed`
/// is the top-level run seed.
pub fn generate_day(
    home: &HomeConfig,
    subject: &SubjectProfile,
    script: &BehaviorScript,
    date: NaiveDate,
    seed: u64,
) -> Result<Vec<SensorEvent>, SimError> {
    script.validate().map_err(|e| SimError::InvalidScript { home: home.id.to_string(), source: e })?;
    if let Some(t) = script.targets.iter().find(|t| !home.has_target(**t)) {
        return Err(SimError::InconsistentConfig { home: home.id.to_string(), target: *t });
    }
    let plan = plan_day(home, script, date, seed);
    Ok(events_from_plan(home, subject, script, &plan, seed))
}

/// Sensor events produced by `plan`.
pub fn events_from_plan(
    home: &HomeConfig,
    subject: &SubjectProfile,
    script: &BehaviorScript,
    plan: &DayPlan,
    seed: u64,
) -> Vec<SensorEvent> {
    let hseed = home_seed(seed, home.id.as_str());
    let mut rng = stream(hseed, plan.date, Stream::Sensors);
    let (lo, hi) = plan.range;
    let mut out = Emitter { home, events: Vec::with_capacity(2048) };
    let target_dev = |kind, target| home.device_for(kind, target);

    // Motion, presence and the tablet follow the subject's stays.
    let tablet = home.devices_of(DeviceKind::TabletPresence).next();
    let tablet_room = tablet.and_then(|t| home.room_of(&t.id));
    for (i, stay) in plan.stays.iter().enumerate() {
        let Place::Room(r) = &stay.place else { continue };
        let continued = i > 0 && plan.stays[i - 1].place == stay.place;
        for dev in home.activity_devices_in(r) {
            match dev.kind {
                DeviceKind::MotionPir => {
                    if stay.still {
                        continue;
                    }
                    let mut t = stay.start + uniform(&mut rng, 1, 3);
                    while t < stay.end {
                        out.binary(dev, t, BinaryState::On);
                        t += uniform(&mut rng, 120, 480);
                    }
                }
                DeviceKind::PresenceMmwave => {
                    let on = stay.start + 2;
                    if !continued && on < stay.end {
                        out.binary(dev, on, BinaryState::On);
                    }
                    let leaves = plan.stays.get(i + 1).is_some_and(|n| n.place != stay.place);
                    if leaves && stay.end > on {
                        out.binary(dev, stay.end, BinaryState::Off);
                    }
                }
                _ => {}
            }
        }
        if let (Some(tab), Some(tr)) = (tablet, tablet_room) {
            if tr == r && !stay.still {
                let mut t = stay.start + 3;
                while t < stay.end {
                    out.binary(tab, t, BinaryState::On);
                    t += TABLET_REPEAT_S;
                }
            }
        }
    }

    // Object contacts.
    for &(t, target) in &plan.openings {
        if let Some(dev) = target_dev(DeviceKind::MagneticContact, target) {
            let (a, b) = match target {
                TargetObject::Fridge => (10, 40),
                TargetObject::MedicineCabinet => (5, 15),
                _ => (5, 20),
            };
            out.binary(dev, t, BinaryState::Open);
            out.binary(dev, t + uniform(&mut rng, a, b), BinaryState::Closed);
        }
    }
    if let Some(door) = target_dev(DeviceKind::EntranceDoorContact, TargetObject::EntranceDoor) {
        for &(leave, ret) in &plan.outings {
            for t in [leave, ret] {
                out.binary(door, t, BinaryState::Open);
                out.binary(door, t + uniform(&mut rng, 8, 20), BinaryState::Closed);
            }
        }
    }
    if let Some(brush) = home.devices_of(DeviceKind::Toothbrush).next() {
        for &(t, d) in &plan.brushings {
            out.push(brush, t, Payload::Toothbrush { duration_s: d });
        }
    }

    // Periodic ambient channels.
    let doy = f64::from(plan.date.ordinal());
    let ambient = AMBIENT_C + 2.0 * script.seasonal_amplitude * (2.0 * PI * (doy - 196.0) / 365.25).cos();
    if let Some(dev) = target_dev(DeviceKind::Temperature, TargetObject::Stove) {
        for t in grid(lo, hi, dev) {
            let heat: f64 = plan.cooking.iter().map(|&(_, s, e)| ramp_decay(t, s, e, STOVE_RISE_C, STOVE_TAU_S)).sum();
            out.push(dev, t, Payload::Scalar { value: round_to(ambient + heat, 2), unit: Unit::Celsius });
        }
    }
    if let Some(dev) = target_dev(DeviceKind::Humidity, TargetObject::Shower) {
        for t in grid(lo, hi, dev) {
            let steam: f64 =
                plan.showers.iter().map(|&(s, e)| ramp_decay(t, s, e, SHOWER_RISE_PCT, SHOWER_TAU_S)).sum();
            out.push(dev, t, Payload::Scalar { value: round_to(AMBIENT_RH + steam, 2), unit: Unit::RelativeHumidity });
        }
    }
    if let Some(dev) = target_dev(DeviceKind::SmartPlugPower, TargetObject::Microwave) {
        let interval = i64::from(dev.interval_s().unwrap_or(300));
        for t in grid(lo, hi, dev) {
            let on: i64 = plan.microwave.iter().map(|&(s, e)| (e.min(t) - s.max(t - interval)).max(0)).sum();
            let w = STANDBY_W + MICROWAVE_W * on as f64 / interval as f64;
            out.push(dev, t, Payload::Scalar { value: round_to(w, 1), unit: Unit::Watt });
        }
    }
    if let Some(dev) = home.devices_of(DeviceKind::Smartwatch).next() {
        let interval = i64::from(dev.interval_s().unwrap_or(300));
        for t in grid(lo, hi, dev) {
            let (w0, w1) = ((t - interval).max(lo), t);
            let (mut outside, mut moving) = (0i64, 0i64);
            let first = plan.stays.partition_point(|s| s.end <= w0);
            for s in plan.stays[first..].iter().take_while(|s| s.start < w1) {
                let d = s.end.min(w1) - s.start.max(w0);
                match (&s.place, s.still) {
                    (Place::Outside, _) => outside += d,
                    (_, false) => moving += d,
                    _ => {}
                }
            }
            let rate =
                (script.outdoor_steps_per_5min * outside as f64 + script.home_steps_per_5min * moving as f64) / 300.0;
            let steps = poisson(&mut rng, rate);
            out.push(dev, t, Payload::Scalar { value: steps as f64, unit: Unit::Steps });
        }
    }

    // Gated channels: the bed mat while occupied, location while outdoors.
    if let Some(mat) = target_dev(DeviceKind::SleepMat, TargetObject::Bed) {
        let off = grid_offset(mat.id.as_str(), mat.interval_s().unwrap_or(60));
        for &(t, phase) in &plan.sleep {
            out.push(mat, t + off, Payload::Sleep(phase));
        }
    }
    if subject.consent.location {
        if let Some(dev) = home.devices_of(DeviceKind::LocationSource).next() {
            let (lat0, lon0) = home.origin;
            for &(leave, ret) in &plan.outings {
                let bearing = rng.random_range(0.0..2.0 * PI);
                let reach_km = rng.random_range(0.3..1.5);
                for t in grid(leave + 1, ret, dev) {
                    let p = (t - leave) as f64 / (ret - leave) as f64;
                    let d = reach_km * (PI * p).sin();
                    let lat = lat0 + d * bearing.cos() / 111.32 + normal(&mut rng, 0.0, 5e-5);
                    let lon =
                        lon0 + d * bearing.sin() / (111.32 * lat0.to_radians().cos()) + normal(&mut rng, 0.0, 5e-5);
                    let fix = LocationFix {
                        lat: round_to(lat, 6),
                        lon: round_to(lon, 6),
                        accuracy_m: round_to(rng.random_range(4.0..25.0), 1),
                    };
                    out.push(dev, t, Payload::Location(fix));
                }
            }
        }
    }

    if let Some(tab) = tablet {
        test_events(home, script, plan.date, seed, plan, tab, &mut out);
    }

    // A caregiver visit: door on arrival and departure, motion all over.
    let pirs: Vec<&DeviceSpec> = home.devices_of(DeviceKind::MotionPir).collect();
    let door = target_dev(DeviceKind::EntranceDoorContact, TargetObject::EntranceDoor);
    let mut crng = stream(hseed, plan.date, Stream::Caregiver);
    for (s, e) in home.caregiver_ranges(plan.date) {
        if let Some(door) = door {
            for t in [s, e - 30] {
                out.binary(door, t, BinaryState::Open);
                out.binary(door, t + 15, BinaryState::Closed);
            }
        }
        if !pirs.is_empty() {
            let mut t = s + uniform(&mut crng, 20, 60);
            while t < e {
                let dev = pirs[crng.random_range(0..pirs.len())];
                out.binary(dev, t, BinaryState::On);
                t += uniform(&mut crng, 180, 480);
            }
        }
    }

    let mut events = out.events;
    events.retain(|e| (lo..hi).contains(&e.timestamp));
    events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.device_id.cmp(&b.device_id)));
    events.dedup_by(|b, a| a.timestamp == b.timestamp && a.device_id == b.device_id);
    events
}

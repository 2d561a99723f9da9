use std::fmt::Write as _;

use serde::Serialize;

use super::{SearchMap, UavTrack};

pub const CSV_HEADER: &str = "t,uav,x,y,theta";

/// One row per pose sample, UAVs in track order.
pub fn export_csv(tracks: &[UavTrack]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for track in tracks {
        for s in &track.samples {
            writeln!(out, "{:.6},{},{:.6},{:.6},{:.6}", s.t, track.uav, s.x, s.y, s.theta).unwrap();
        }
    }
    out
}

#[derive(Serialize)]
struct Doc<'a> {
    tracks: &'a [UavTrack],
    map: &'a SearchMap,
}

pub fn export_json(tracks: &[UavTrack], map: &SearchMap) -> String {
    serde_json::to_string_pretty(&Doc { tracks, map }).expect("tracks serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mission::GridConfig;
    use crate::sim::{run, Scenario, UavStart};

    #[test]
    fn empty_is_header_only() {
        assert_eq!(export_csv(&[]), "t,uav,x,y,theta\n");
    }

    #[test]
    fn rows_match_samples_and_are_stable() {
        let mut s = Scenario::new(
            GridConfig::with_cells(5),
            vec![UavStart { x: 50.0, y: 50.0, heading: 90 }, UavStart { x: 450.0, y: 450.0, heading: 270 }],
        );
        s.duration = 60.0;
        s.random_threats = 3;
        s.seed = 9;
        let a = run(&s).unwrap();
        let b = run(&s).unwrap();
        let csv = export_csv(&a.tracks);
        let rows: usize = a.tracks.iter().map(|t| t.samples.len()).sum();
        assert_eq!(csv.lines().count(), rows + 1);
        assert_eq!(csv, export_csv(&b.tracks));
        assert_eq!(export_json(&a.tracks, &a.map), export_json(&b.tracks, &b.map));
    }
}

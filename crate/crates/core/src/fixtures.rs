//! Small hand-built schedules used by tests, examples and the CLI.

use crate::model::{BusRun, Instance, Seconds, Station, StationId, Stop, TravelTimeMatrix};

fn stations(n: usize) -> Vec<Station> {
    (0..n)
        .map(|i| Station { id: StationId(i), label: format!("s{}", i + 1), lat: None, lon: None })
        .collect()
}

fn run(id: &str, stops: &[(usize, Seconds, u32)]) -> BusRun {
    BusRun {
        id: id.into(),
        stops: stops
            .iter()
            .map(|&(s, t, d)| Stop { station: StationId(s), arrival_s: t, demand_pods: d })
            .collect(),
    }
}

/// Two overlapping runs over three stations in a ten-minute horizon
/// (t = 0 is 8:00). Decomposes into three routes and needs two pods.
pub fn fig4_instance() -> Instance {
    Instance {
        stations: stations(3),
        travel: TravelTimeMatrix(vec![vec![0, 120, 300], vec![120, 0, 180], vec![300, 180, 0]]),
        runs: vec![
            run("run1", &[(0, 0, 2), (1, 120, 2), (2, 300, 1)]),
            run("run2", &[(0, 300, 1), (1, 420, 1), (2, 600, 1)]),
        ],
        horizon_s: 600,
    }
}

/// Four runs over seven stations (t = 0 is 13:00). Ten routes, fifteen
/// compatible pairs, six pods.
pub fn fig1_instance() -> Instance {
    const MIN: Seconds = 60;
    let n = 7;
    let edges = [(0, 1, 2), (1, 2, 3), (2, 3, 2), (4, 5, 4), (5, 2, 3), (2, 6, 4), (1, 5, 5)];
    let mut d = vec![vec![Seconds::MAX / 4; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for (a, b, m) in edges {
        d[a][b] = m * MIN;
        d[b][a] = m * MIN;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    let m = |x: Seconds| x * MIN;
    Instance {
        stations: stations(n),
        travel: TravelTimeMatrix(d),
        runs: vec![
            run("A", &[(0, m(0), 3), (1, m(2), 3), (2, m(5), 2), (3, m(7), 2)]),
            run("B", &[(0, m(18), 2), (1, m(20), 2), (2, m(23), 1), (3, m(25), 1)]),
            run("C", &[(4, m(13), 1), (5, m(17), 2), (2, m(20), 2), (6, m(24), 1)]),
            run("D", &[(4, m(3), 2), (5, m(7), 3), (2, m(10), 3), (6, m(14), 1)]),
        ],
        horizon_s: 1560,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::decompose_instance;
    use crate::model::validate_instance;

    #[test]
    fn fixtures_are_valid() {
        assert!(validate_instance(&fig4_instance()).is_empty());
        assert!(validate_instance(&fig1_instance()).is_empty());
    }

    #[test]
    fn route_counts() {
        assert_eq!(decompose_instance(&fig4_instance()).len(), 3);
        assert_eq!(decompose_instance(&fig1_instance()).len(), 10);
    }

    #[test]
    fn fig1_travel_is_symmetric_closure() {
        let t = fig1_instance().travel;
        assert_eq!(t.0[0][3], 7 * 60);
        assert_eq!(t.0[4][6], 11 * 60);
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(t.0[i][j], t.0[j][i]);
            }
        }
    }
}

//! Zones, adjacency and teleport links.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneId(pub u32);

impl ZoneId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "zone#{}", self.0)
    }
}

/// One zone as written in a scenario file. Links refer to other zones by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSpec {
    pub name: String,
    #[serde(default = "one")]
    pub density_weight: f64,
    #[serde(default)]
    pub is_city: bool,
    #[serde(default)]
    pub adjacent: Vec<String>,
    #[serde(default)]
    pub teleports: Vec<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub zones: Vec<ZoneSpec>,
}

impl Default for WorldSpec {
    /// Eight zones; two cities at five times the base density and one teleport pair
    /// between them.
    fn default() -> Self {
        let z = |name: &str, w: f64, city: bool, adj: &[&str], tp: &[&str]| ZoneSpec {
            name: name.to_string(),
            density_weight: w,
            is_city: city,
            adjacent: adj.iter().map(|s| s.to_string()).collect(),
            teleports: tp.iter().map(|s| s.to_string()).collect(),
        };
        WorldSpec {
            zones: vec![
                z("ironforge", 5.0, true, &["dun_morogh", "loch_modan"], &["stormwind"]),
                z("dun_morogh", 1.0, false, &["wetlands"], &[]),
                z("loch_modan", 1.0, false, &["wetlands", "badlands"], &[]),
                z("wetlands", 1.0, false, &["arathi"], &[]),
                z("badlands", 1.0, false, &["searing_gorge"], &[]),
                z("searing_gorge", 1.0, false, &["stormwind"], &[]),
                z("arathi", 1.0, false, &["stormwind"], &[]),
                z("stormwind", 5.0, true, &[], &[]),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub id: ZoneId,
    pub name: String,
    pub density_weight: f64,
    pub adjacent: BTreeSet<ZoneId>,
    pub teleport_links: BTreeSet<ZoneId>,
    pub restricted: bool,
    pub is_city: bool,
}

/// A validated world with symmetric links and a precomputed hop-distance table.
#[derive(Debug, Clone)]
pub struct WorldMap {
    zones: Vec<Zone>,
    by_name: HashMap<String, ZoneId>,
    neighbors: Vec<Vec<ZoneId>>,
    /// `distance[a][b]`, `u32::MAX` when unreachable.
    distance: Vec<Vec<u32>>,
}

pub const UNREACHABLE: u32 = u32::MAX;

pub fn build_world(spec: &WorldSpec) -> Result<WorldMap, ValidationError> {
    let mut errors = Vec::new();
    if spec.zones.is_empty() {
        errors.push("world has no zones".to_string());
    }
    let mut by_name = HashMap::new();
    for (i, z) in spec.zones.iter().enumerate() {
        if by_name.insert(z.name.clone(), ZoneId(i as u32)).is_some() {
            errors.push(format!("duplicate zone name `{}`", z.name));
        }
        if !(z.density_weight >= 0.0) || !z.density_weight.is_finite() {
            errors.push(format!("zone `{}`: density_weight must be a finite nonnegative number", z.name));
        }
    }
    if !spec.zones.is_empty() && !(spec.zones.iter().map(|z| z.density_weight).sum::<f64>() > 0.0) {
        errors.push("density weights must sum to a positive value".to_string());
    }

    let mut zones: Vec<Zone> = spec
        .zones
        .iter()
        .enumerate()
        .map(|(i, z)| Zone {
            id: ZoneId(i as u32),
            name: z.name.clone(),
            density_weight: z.density_weight,
            adjacent: BTreeSet::new(),
            teleport_links: BTreeSet::new(),
            restricted: false,
            is_city: z.is_city,
        })
        .collect();

    for (i, z) in spec.zones.iter().enumerate() {
        for (kind, links) in [("adjacent", &z.adjacent), ("teleports", &z.teleports)] {
            for other in links {
                let Some(&j) = by_name.get(other) else {
                    errors.push(format!("zone `{}`: {kind} references unknown zone `{other}`", z.name));
                    continue;
                };
                if j.index() == i {
                    continue;
                }
                let me = ZoneId(i as u32);
                if kind == "adjacent" {
                    zones[i].adjacent.insert(j);
                    zones[j.index()].adjacent.insert(me);
                } else {
                    zones[i].teleport_links.insert(j);
                    zones[j.index()].teleport_links.insert(me);
                }
            }
        }
    }
    ValidationError::check(errors)?;

    let neighbors: Vec<Vec<ZoneId>> = zones
        .iter()
        .map(|z| z.adjacent.union(&z.teleport_links).copied().collect())
        .collect();
    let distance = (0..zones.len()).map(|s| bfs(&neighbors, s)).collect();
    Ok(WorldMap { zones, by_name, neighbors, distance })
}

fn bfs(neighbors: &[Vec<ZoneId>], start: usize) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; neighbors.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for v in &neighbors[u] {
            if dist[v.index()] == UNREACHABLE {
                dist[v.index()] = dist[u] + 1;
                queue.push_back(v.index());
            }
        }
    }
    dist
}

impl WorldMap {
    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn zone(&self, id: ZoneId) -> &Zone {
        &self.zones[id.index()]
    }

    pub fn zone_id(&self, name: &str) -> Option<ZoneId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ZoneId) -> &str {
        &self.zones[id.index()].name
    }

    /// Adjacent and teleport-linked zones, ascending by id.
    pub fn neighbors(&self, id: ZoneId) -> &[ZoneId] {
        &self.neighbors[id.index()]
    }

    /// Hop distance over adjacency and teleport links.
    pub fn hop_distance(&self, a: ZoneId, b: ZoneId) -> Option<u32> {
        let d = self.distance[a.index()][b.index()];
        (d != UNREACHABLE).then_some(d)
    }

    pub(crate) fn raw_distance(&self, a: ZoneId, b: ZoneId) -> u32 {
        self.distance[a.index()][b.index()]
    }

    pub fn is_restricted(&self, id: ZoneId) -> bool {
        self.zones[id.index()].restricted
    }

    pub fn set_restricted(&mut self, id: ZoneId, restricted: bool) {
        self.zones[id.index()].restricted = restricted;
    }

    pub fn density_weights(&self) -> Vec<f64> {
        self.zones.iter().map(|z| z.density_weight).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = ZoneId> + '_ {
        (0..self.zones.len() as u32).map(ZoneId)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, teleport: Option<(usize, usize)>) -> WorldSpec {
        let mut zones: Vec<ZoneSpec> = (0..n)
            .map(|i| ZoneSpec {
                name: format!("z{i}"),
                density_weight: 1.0,
                is_city: false,
                adjacent: if i + 1 < n { vec![format!("z{}", i + 1)] } else { vec![] },
                teleports: vec![],
            })
            .collect();
        if let Some((a, b)) = teleport {
            zones[a].teleports.push(format!("z{b}"));
        }
        WorldSpec { zones }
    }

    /// Independent oracle: brute-force relaxation over an explicit edge list.
    fn relax_distance(spec: &WorldSpec, from: usize, to: usize) -> u32 {
        let n = spec.zones.len();
        let idx = |s: &str| spec.zones.iter().position(|z| z.name == s).unwrap();
        let mut edges = Vec::new();
        for (i, z) in spec.zones.iter().enumerate() {
            for o in z.adjacent.iter().chain(&z.teleports) {
                edges.push((i, idx(o)));
                edges.push((idx(o), i));
            }
        }
        let mut d = vec![u32::MAX / 2; n];
        d[from] = 0;
        for _ in 0..n {
            for &(a, b) in &edges {
                d[b] = d[b].min(d[a] + 1);
            }
        }
        d[to]
    }

    #[test]
    fn single_zone_world() {
        let w = build_world(&WorldSpec {
            zones: vec![ZoneSpec {
                name: "only".into(),
                density_weight: 1.0,
                is_city: false,
                adjacent: vec![],
                teleports: vec![],
            }],
        })
        .unwrap();
        assert_eq!(w.len(), 1);
        assert!(w.zone(ZoneId(0)).adjacent.is_empty());
        assert!(w.neighbors(ZoneId(0)).is_empty());
    }

    #[test]
    fn teleport_shortcuts_a_line() {
        let spec = line(5, Some((0, 4)));
        let w = build_world(&spec).unwrap();
        assert_eq!(relax_distance(&spec, 0, 4), 1);
        assert_eq!(w.hop_distance(ZoneId(0), ZoneId(4)), Some(1));
        assert_eq!(w.hop_distance(ZoneId(1), ZoneId(4)), Some(relax_distance(&spec, 1, 4)));
        let no_tp = build_world(&line(5, None)).unwrap();
        assert_eq!(no_tp.hop_distance(ZoneId(0), ZoneId(4)), Some(4));
    }

    #[test]
    fn adjacency_is_symmetrized() {
        let w = build_world(&line(2, None)).unwrap();
        assert!(w.zone(ZoneId(0)).adjacent.contains(&ZoneId(1)));
        assert!(w.zone(ZoneId(1)).adjacent.contains(&ZoneId(0)));
    }

    #[test]
    fn dangling_reference_names_the_zone() {
        let mut spec = line(2, None);
        spec.zones[1].adjacent.push("atlantis".into());
        let err = build_world(&spec).unwrap_err();
        assert!(err.violations[0].contains("atlantis"), "{err}");
    }

    #[test]
    fn empty_world_rejected() {
        assert!(build_world(&WorldSpec { zones: vec![] }).is_err());
    }

    #[test]
    fn default_world_shape() {
        let w = build_world(&WorldSpec::default()).unwrap();
        assert_eq!(w.len(), 8);
        let cities: Vec<_> = w.zones().iter().filter(|z| z.is_city).collect();
        assert_eq!(cities.len(), 2);
        assert!(cities.iter().all(|c| c.density_weight == 5.0));
        let tp: usize = w.zones().iter().map(|z| z.teleport_links.len()).sum();
        assert_eq!(tp, 2);
        for a in w.ids() {
            for b in w.ids() {
                assert!(w.hop_distance(a, b).is_some());
            }
        }
    }

    #[test]
    fn restriction_is_a_flag() {
        let mut w = build_world(&line(3, None)).unwrap();
        w.set_restricted(ZoneId(1), true);
        assert_eq!(w.len(), 3);
        assert_eq!(w.hop_distance(ZoneId(0), ZoneId(2)), Some(2));
        assert!(w.is_restricted(ZoneId(1)));
    }
}

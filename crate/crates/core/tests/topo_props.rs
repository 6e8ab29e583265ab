// Copyright 2026 The idrsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

mod common;

use idrsim::topo::{Asn, Link, Relationship, RelationshipKind, Topology};
use proptest::prelude::*;

fn arb_policy_topology() -> impl Strategy<Value = Topology> {
    (2u32..12).prop_flat_map(|n| {
        let pairs: Vec<(u32, u32)> = (1..=n).flat_map(|a| ((a + 1)..=n).map(move |b| (a, b))).collect();
        let m = pairs.len();
        (Just(n), Just(pairs), proptest::collection::vec(0u8..4, m))
    })
    .prop_map(|(n, pairs, kinds)| {
        let mut t = Topology::new();
        for a in 1..=n {
            t.add_node(Asn(a * 7));
        }
        for ((a, b), k) in pairs.into_iter().zip(kinds) {
            let (a, b) = (Asn(a * 7), Asn(b * 7));
            let rel = match k {
                0 => continue,
                1 => Relationship::PeerToPeer,
                2 => Relationship::CustomerToProvider { customer: a },
                _ => Relationship::CustomerToProvider { customer: b },
            };
            t.add_link(a, b, Link::new(rel)).unwrap();
        }
        t
    })
}

proptest! {
    #[test]
    fn caida_round_trip(t in arb_policy_topology()) {
        let text = t.to_caida().unwrap();
        let back = Topology::parse_caida(&text).unwrap();
        prop_assert_eq!(back.links().collect::<Vec<_>>(), t.links().collect::<Vec<_>>());
        let crlf = text.replace('\n', "\r\n");
        prop_assert_eq!(Topology::parse_caida(&crlf).unwrap(), back);
    }

    #[test]
    fn clique_shape(n in 2usize..32) {
        let t = Topology::clique(n, RelationshipKind::FullTransit).unwrap();
        prop_assert_eq!(t.node_count(), n);
        prop_assert_eq!(t.link_count(), n * (n - 1) / 2);
        prop_assert_eq!(t.diameter(), Some(1));
    }

    #[test]
    fn declare_cluster_only_tags(n in 2usize..12, mask in any::<u16>()) {
        let t = Topology::clique(n, RelationshipKind::PeerToPeer).unwrap();
        let members: Vec<Asn> = t.nodes().filter(|a| mask & (1 << (a.0 - 1)) != 0).collect();
        let c = t.clone().declare_cluster(members.clone()).unwrap();
        prop_assert_eq!(c.node_count(), t.node_count());
        prop_assert_eq!(c.link_count(), t.link_count());
        prop_assert_eq!(c.cluster_internal_links().count(), members.len() * members.len().saturating_sub(1) / 2);
    }

    #[test]
    fn assign_is_deterministic(origins in proptest::collection::vec(1u32..6, 0..20)) {
        let base = Topology::clique(5, RelationshipKind::FullTransit).unwrap();
        let o: Vec<Asn> = origins.into_iter().map(Asn).collect();
        let a = base.clone().assign_prefixes(&o).unwrap().to_json();
        let b = base.assign_prefixes(&o).unwrap().to_json();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip(seed in any::<u64>(), f in 0.0f64..=1.0) {
        let t = common::gao_rexford_topology(seed, f);
        prop_assert_eq!(Topology::from_json(&t.to_json()).unwrap(), t);
    }
}

#[test]
fn shipped_caida_file_parses() {
    let text = std::fs::read_to_string(common::scenarios_dir().join("gao-rexford.caida")).unwrap();
    let t = Topology::parse_caida(&text).unwrap();
    assert_eq!(t.node_count(), 10);
    assert!(t.is_connected());
}

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

//! Decision process and valley-free export policy.

use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use super::BgpError;
use crate::topo::{Asn, PeerRole, Prefix};

/// Where the holder of a route learned it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteSource {
    /// Originated by the holder itself.
    Local,
    Customer,
    Peer,
    Provider,
    Transit,
}

impl From<PeerRole> for RouteSource {
    fn from(role: PeerRole) -> Self {
        match role {
            PeerRole::Customer => RouteSource::Customer,
            PeerRole::Peer => RouteSource::Peer,
            PeerRole::Provider => RouteSource::Provider,
            PeerRole::Transit => RouteSource::Transit,
        }
    }
}

impl RouteSource {
    /// Relationship class strictly dominates path length: the gaps exceed any path.
    pub fn local_pref(self) -> u32 {
        match self {
            RouteSource::Local => u32::MAX,
            RouteSource::Customer => 130,
            RouteSource::Peer => 110,
            RouteSource::Transit => 100,
            RouteSource::Provider => 90,
        }
    }
}

/// A route as stored by its holder.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RouteAdvert {
    pub prefix: Prefix,
    /// Most recent prepender first, origin last.
    pub as_path: Vec<Asn>,
    pub next_hop: Asn,
    pub learned_from: RouteSource,
}

impl RouteAdvert {
    pub fn local(prefix: Prefix, me: Asn) -> Self {
        RouteAdvert { prefix, as_path: vec![me], next_hop: me, learned_from: RouteSource::Local }
    }

    pub fn origin(&self) -> Asn {
        *self.as_path.last().expect("as_path is never empty")
    }

    fn rank(&self) -> (Reverse<u32>, usize, Asn, &[Asn]) {
        (Reverse(self.learned_from.local_pref()), self.as_path.len(), self.next_hop, &self.as_path)
    }
}

/// Picks the best route: highest local preference, then shortest AS path, then lowest
/// next-hop ASN.
pub fn decide<'a, I>(candidates: I, me: Asn) -> Result<Option<&'a RouteAdvert>, BgpError>
where
    I: IntoIterator<Item = &'a RouteAdvert>,
{
    let mut best: Option<&RouteAdvert> = None;
    for c in candidates {
        debug_assert!(!c.as_path.contains(&me) || c.learned_from == RouteSource::Local);
        if let Some(b) = best {
            if b.prefix != c.prefix {
                return Err(BgpError::InvalidArgument(format!(
                    "decision over mixed prefixes {} and {}",
                    b.prefix, c.prefix
                )));
            }
            if c.rank() < b.rank() {
                best = Some(c);
            }
        } else {
            best = Some(c);
        }
    }
    Ok(best)
}

/// Valley-free rule: customer-learned and local routes go everywhere, peer- and
/// provider-learned routes only go down to customers. Transit links carry everything.
pub fn exportable(source: RouteSource, to: PeerRole) -> bool {
    match (source, to) {
        (_, PeerRole::Transit) => true,
        (RouteSource::Local | RouteSource::Customer | RouteSource::Transit, _) => true,
        (RouteSource::Peer | RouteSource::Provider, PeerRole::Customer) => true,
        (RouteSource::Peer | RouteSource::Provider, PeerRole::Peer | PeerRole::Provider) => false,
    }
}

/// The advertisement `me` would send for `route` over a session of kind `to`, with `me`
/// prepended, or `None` when policy suppresses it.
pub fn export_filter(route: &RouteAdvert, to: PeerRole, me: Asn) -> Option<RouteAdvert> {
    if !exportable(route.learned_from, to) {
        return None;
    }
    let mut as_path = Vec::with_capacity(route.as_path.len() + 1);
    if route.learned_from != RouteSource::Local {
        as_path.push(me);
    }
    as_path.extend_from_slice(&route.as_path);
    Some(RouteAdvert { prefix: route.prefix, as_path, next_hop: me, learned_from: route.learned_from })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn route(path: &[u32], src: RouteSource) -> RouteAdvert {
        RouteAdvert {
            prefix: Prefix(0),
            as_path: path.iter().map(|a| Asn(*a)).collect(),
            next_hop: Asn(path[0]),
            learned_from: src,
        }
    }

    /// Independent pairwise oracle: `a` beats `b` iff the first differing criterion
    /// favours it.
    fn beats(a: &RouteAdvert, b: &RouteAdvert) -> bool {
        let pref = |r: &RouteAdvert| match r.learned_from {
            RouteSource::Local => 1000,
            RouteSource::Customer => 3,
            RouteSource::Peer => 2,
            RouteSource::Transit => 1,
            RouteSource::Provider => 0,
        };
        if pref(a) != pref(b) {
            return pref(a) > pref(b);
        }
        if a.as_path.len() != b.as_path.len() {
            return a.as_path.len() < b.as_path.len();
        }
        a.next_hop < b.next_hop
    }

    #[test]
    fn customer_beats_shorter_peer() {
        let peer = route(&[2, 9], RouteSource::Peer);
        let cust = route(&[3, 4, 9], RouteSource::Customer);
        let set = [peer.clone(), cust.clone()];
        assert!(beats(&cust, &peer) && !beats(&peer, &cust));
        assert_eq!(decide(&set, Asn(1)).unwrap(), Some(&cust));
    }

    #[test]
    fn tie_break_lower_next_hop() {
        let set = [route(&[3, 9], RouteSource::Transit), route(&[2, 9], RouteSource::Transit)];
        assert_eq!(decide(&set, Asn(1)).unwrap().unwrap().as_path, vec![Asn(2), Asn(9)]);
    }

    #[test]
    fn empty_and_mixed() {
        assert_eq!(decide(&[] as &[RouteAdvert], Asn(1)).unwrap(), None);
        let mut other = route(&[3, 9], RouteSource::Peer);
        other.prefix = Prefix(1);
        let set = [route(&[2, 9], RouteSource::Peer), other];
        assert!(matches!(decide(&set, Asn(1)), Err(BgpError::InvalidArgument(_))));
    }

    #[test]
    fn decide_matches_pairwise_oracle() {
        let sources = [RouteSource::Customer, RouteSource::Peer, RouteSource::Provider, RouteSource::Transit];
        let mut pool = Vec::new();
        for (i, s) in sources.iter().enumerate() {
            for len in 1..=3u32 {
                let mut path: Vec<u32> = vec![10 + i as u32 + len * 4];
                path.extend((0..len - 1).map(|k| 50 + k));
                path.push(99);
                pool.push(route(&path, *s));
            }
        }
        // every subset of size <= 3
        for a in 0..pool.len() {
            for b in a..pool.len() {
                for c in b..pool.len() {
                    let set: Vec<_> = [a, b, c].iter().map(|i| pool[*i].clone()).collect();
                    let got = decide(&set, Asn(1)).unwrap().unwrap();
                    assert!(set.iter().all(|o| o == got || beats(got, o)), "{set:?} -> {got:?}");
                }
            }
        }
    }

    #[test]
    fn valley_free_table() {
        use PeerRole::*;
        use RouteSource as S;
        // Expected table, written out by hand: rows learned-from, columns export target.
        let table = [
            (S::Local, [true, true, true]),
            (S::Customer, [true, true, true]),
            (S::Peer, [true, false, false]),
            (S::Provider, [true, false, false]),
        ];
        for (src, row) in table {
            for (to, want) in [Customer, Peer, Provider].into_iter().zip(row) {
                let r = if src == S::Local { RouteAdvert::local(Prefix(0), Asn(1)) } else { route(&[2, 9], src) };
                assert_eq!(export_filter(&r, to, Asn(1)).is_some(), want, "{src:?} -> {to:?}");
            }
            assert!(exportable(src, Transit));
        }
        for to in [Customer, Peer, Provider, Transit] {
            assert!(exportable(S::Transit, to));
        }
    }

    #[test]
    fn export_prepends_self() {
        let local = RouteAdvert::local(Prefix(0), Asn(9));
        let out = export_filter(&local, PeerRole::Provider, Asn(9)).unwrap();
        assert_eq!(out.as_path, vec![Asn(9)]);
        let learned = route(&[2, 9], RouteSource::Customer);
        let out = export_filter(&learned, PeerRole::Peer, Asn(1)).unwrap();
        assert_eq!(out.as_path, vec![Asn(1), Asn(2), Asn(9)]);
        assert_eq!(out.next_hop, Asn(1));
    }
}

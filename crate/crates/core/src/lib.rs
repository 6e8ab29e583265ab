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

//! Discrete-event simulator for interdomain routing where some ASes hand their routing
//! decisions to a central controller while the rest keep running BGP.

pub mod bgp;
pub mod collector;
pub mod harness;
pub mod sdn;
pub mod sim;
pub mod time;
pub mod topo;

#pragma once

#include <map>
#include <set>
#include <utility>
#include <vector>

#include "clab/engine.hpp"

// Post-run oracles over committed access traces. Kept independent of the
// engine internals: they see only (key, mode, access time, commit time).
namespace clab::test_oracles {

// Precedence-graph acyclicity: writes serialize at commit time, reads at
// access time. Holds for strict-2PL histories and validated optimistic ones.
inline bool precedence_acyclic(const engine::RunTrace& trace) {
  struct Op {
    int txn;
    bool write;
    double t_access;
    double t_commit;
  };
  std::map<std::uint64_t, std::vector<Op>> by_key;
  for (int i = 0; i < static_cast<int>(trace.committed.size()); ++i) {
    const auto& t = trace.committed[i];
    for (const auto& a : t.accesses)
      by_key[a.key].push_back(
          {i, a.mode == workload::LockMode::Exclusive, a.time, t.commit_time});
  }
  std::map<int, std::set<int>> adj;
  for (const auto& [key, ops] : by_key) {
    (void)key;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      for (std::size_t j = i + 1; j < ops.size(); ++j) {
        const Op& a = ops[i];
        const Op& b = ops[j];
        if (!a.write && !b.write) continue;
        if (a.write && b.write) {
          if (a.t_commit < b.t_commit)
            adj[a.txn].insert(b.txn);
          else
            adj[b.txn].insert(a.txn);
        } else {
          const Op& w = a.write ? a : b;
          const Op& r = a.write ? b : a;
          if (r.t_access < w.t_commit)
            adj[r.txn].insert(w.txn);
          else
            adj[w.txn].insert(r.txn);
        }
      }
    }
  }
  std::map<int, int> color;
  std::vector<std::pair<int, std::set<int>::iterator>> stack;
  for (auto& [start, edges] : adj) {
    (void)edges;
    if (color[start] != 0) continue;
    color[start] = 1;
    stack.push_back({start, adj[start].begin()});
    while (!stack.empty()) {
      auto& [node, it] = stack.back();
      if (it == adj[node].end()) {
        color[node] = 2;
        stack.pop_back();
        continue;
      }
      const int next = *it++;
      if (color[next] == 1) return false;
      if (color[next] == 0) {
        color[next] = 1;
        stack.push_back({next, adj[next].begin()});
      }
    }
  }
  return true;
}

// Strict-2PL safety: an exclusive hold [grant, commit) never overlaps any
// other hold of the same object. Only meaningful for locking policies.
inline bool exclusive_holds_disjoint(const engine::RunTrace& trace) {
  struct Hold {
    bool write;
    double from;
    double to;
  };
  std::map<std::uint64_t, std::vector<Hold>> by_key;
  for (const auto& t : trace.committed)
    for (const auto& a : t.accesses)
      by_key[a.key].push_back(
          {a.mode == workload::LockMode::Exclusive, a.time, t.commit_time});
  for (const auto& [key, holds] : by_key) {
    (void)key;
    for (std::size_t i = 0; i < holds.size(); ++i)
      for (std::size_t j = i + 1; j < holds.size(); ++j) {
        if (!holds[i].write && !holds[j].write) continue;
        if (holds[i].from < holds[j].to && holds[j].from < holds[i].to) return false;
      }
  }
  return true;
}

}  // namespace clab::test_oracles

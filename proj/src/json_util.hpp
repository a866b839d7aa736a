#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "clab/errors.hpp"
#include "clab/workload.hpp"

namespace clab::detail {

// Scenario and workload schemas are strict: unknown fields are typos.
inline void check_known_fields(const nlohmann::json& obj,
                               std::initializer_list<const char*> known,
                               const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) {
          return it.key() == k;
        }) == known.end())
      throw InputError("unknown field '" + it.key() + "' in " + where);
  }
}

}  // namespace clab::detail

namespace clab::workload {
WorkloadSpec workload_from_json(const nlohmann::json& root);
}

#pragma once

#include <string>
#include <vector>

#include "trussvae/datagen.hpp"
#include "trussvae/homogenize.hpp"
#include "trussvae/parallel.hpp"

namespace trussvae {

struct DroppedRecord {
  std::size_t index = 0;
  std::string reason;
};

/**
 * Fills stiffness9 labels in place by homogenizing every record at density
 * rho. Records that fail (mechanisms, symmetry violations) are removed and
 * reported; survivors keep their relative order.
 */
inline std::vector<DroppedRecord> label_stiffness(std::vector<DatasetRecord>& records, double rho,
                                                  const MaterialParams& mat, unsigned threads = 0) {
  std::vector<std::string> errors(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    try {
      records[i].properties = PropertyVector::from_stiffness(homogenize_graph(records[i].graph, rho, mat));
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  std::vector<DroppedRecord> dropped;
  std::vector<DatasetRecord> kept;
  kept.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (errors[i].empty())
      kept.push_back(std::move(records[i]));
    else
      dropped.push_back({i, errors[i]});
  }
  records = std::move(kept);
  return dropped;
}

}  // namespace trussvae

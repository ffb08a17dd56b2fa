#ifndef DUALTRAIN_CHECKPOINT_HPP
#define DUALTRAIN_CHECKPOINT_HPP

#include <filesystem>
#include <string>

#include "dualtrain/model.hpp"
#include "dualtrain/reparam.hpp"
#include "dualtrain/trainer.hpp"

namespace dualtrain {

// Directory checkpoint: manifest.json plus one raw little-endian array file
// per tensor (f64 for dense tensors, the quantized blob layout for quantized
// bases). Chosen over a container format for diffability.
struct Checkpoint {
  int step = 0;
  ModelSpec spec;
  ModelParams params;                         // effective parameters
  std::optional<AdapterSet> adapters;         // adapter-trainer runs
  Vector optimizer_state;                     // flattened
};

void write_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::filesystem::path& dir);

}  // namespace dualtrain

#endif

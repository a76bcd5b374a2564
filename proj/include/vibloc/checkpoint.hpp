#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vibloc/adam.hpp"
#include "vibloc/matrix.hpp"
#include "vibloc/vib.hpp"

namespace vibloc {

// Container format shared by model checkpoints and dataset caches:
//   magic line       VIBLOC-CHECKPOINT v1
//   meta             key=value lines
//   records          "@param <name> <rows> <cols>" line followed by
//                    rows*cols little-endian float64 payload and a newline
//   terminator       "@end"
// Doubles round-trip bit-exactly: binary payloads verbatim, meta doubles
// printed with 17 significant digits.
struct CheckpointRecord {
  std::string name;
  Matrix values;
};

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<CheckpointRecord> records;

  const std::string* find_meta(const std::string& key) const;
  const std::string& require_meta(const std::string& key) const;
  const CheckpointRecord* find_record(const std::string& name) const;
};

void write_checkpoint(const Checkpoint& ckpt, const std::string& path);
// ParseError (with byte offset) on malformed content, ConfigError on an
// unsupported version, IoError if the file cannot be read.
Checkpoint read_checkpoint(const std::string& path);

// Formats a double with enough digits to reparse to the identical bits.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& what);
long parse_long(const std::string& s, const std::string& what);

std::vector<std::pair<std::string, std::string>> config_to_meta(
    const VibConfig& cfg);
VibConfig config_from_meta(const Checkpoint& ckpt);

void save_model(const VibModel& model, const std::string& path);
VibModel load_model(const std::string& path);

// Model plus optimizer accumulators, for exact training resume.
struct TrainingState {
  VibModel model;
  AdamState adam;
};

void save_training_state(const VibModel& model, const AdamState& adam,
                         const std::string& path);
TrainingState load_training_state(const std::string& path);

}  // namespace vibloc

// Shared checkpoint layout for GAE1, RBM1 and FFN1 files: one line of
// compact JSON (keys sorted, terminated by '\n') followed by the parameter
// arrays as raw little-endian IEEE-754 float32 values, row-major, in the
// order the format defines.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "musgae/nn_core.h"

namespace musgae {

void write_checkpoint(std::ostream& out, const nlohmann::json& header, std::span<const Matrix* const> arrays);

class CheckpointReader {
 public:
  // Reads the header line and the whole payload. Throws DataError if the
  // header is not JSON or its "format" field differs from `format` (unless
  // `format` is empty).
  CheckpointReader(std::istream& in, const std::string& format);

  const nlohmann::json& header() const { return header_; }

  // Next rows x cols block of the payload; DataError if too short.
  Matrix next(Eigen::Index rows, Eigen::Index cols);
  // DataError unless the payload was consumed exactly.
  void finish() const;

 private:
  nlohmann::json header_;
  std::vector<float> payload_;
  size_t cursor_ = 0;
};

// "format" field of a checkpoint file's header line ("GAE1", "RBM1", "FFN1").
std::string peek_checkpoint_format(const std::filesystem::path& path);

}  // namespace musgae

#include "musgae/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "musgae/errors.h"

namespace musgae {

void write_checkpoint(std::ostream& out, const nlohmann::json& header, std::span<const Matrix* const> arrays) {
  const std::string line = header.dump();
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.put('\n');
  std::vector<char> buf;
  for (const Matrix* m : arrays) {
    buf.resize(static_cast<size_t>(m->size()) * 4);
    for (Eigen::Index i = 0; i < m->size(); ++i) {
      const auto bits = std::bit_cast<uint32_t>(m->data()[i]);
      for (int b = 0; b < 4; ++b) buf[static_cast<size_t>(i) * 4 + static_cast<size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

CheckpointReader::CheckpointReader(std::istream& in, const std::string& format) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoint: missing header line");
  try {
    header_ = nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint: header is not valid JSON: ") + e.what());
  }
  if (!header_.is_object() || !header_.contains("format")) throw DataError("checkpoint: header lacks a format field");
  if (!format.empty() && header_["format"] != format) {
    throw DataError("checkpoint: expected format " + format + ", found " + header_["format"].dump());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) throw DataError("checkpoint: payload is not a whole number of float32 values");
  payload_.resize(bytes.size() / 4);
  for (size_t i = 0; i < payload_.size(); ++i) {
    uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<uint32_t>(bytes[i * 4 + static_cast<size_t>(b)]) << (8 * b);
    payload_[i] = std::bit_cast<float>(bits);
  }
}

Matrix CheckpointReader::next(Eigen::Index rows, Eigen::Index cols) {
  const auto n = static_cast<size_t>(rows * cols);
  if (cursor_ + n > payload_.size()) throw DataError("checkpoint: payload shorter than the header declares");
  Matrix m(rows, cols);
  std::memcpy(m.data(), payload_.data() + cursor_, n * sizeof(float));
  cursor_ += n;
  if (!m.allFinite()) throw DataError("checkpoint: non-finite parameter values");
  return m;
}

void CheckpointReader::finish() const {
  if (cursor_ != payload_.size()) throw DataError("checkpoint: payload longer than the header declares");
}

std::string peek_checkpoint_format(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string line;
  std::getline(in, line);
  try {
    return nlohmann::json::parse(line).at("format").get<std::string>();
  } catch (const std::exception&) {
    throw DataError(path.string() + " is not a checkpoint file");
  }
}

}  // namespace musgae

#include "musgae/midi.h"

#include <algorithm>
#include <deque>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include "json.hpp"
#include "musgae/errors.h"

namespace musgae {
namespace {

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  size_t pos() const { return pos_; }
  size_t remaining() const { return bytes_.size() - pos_; }

  uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  uint8_t peek() {
    need(1);
    return bytes_[pos_];
  }
  uint32_t be(int n) {
    uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | u8();
    return v;
  }
  uint32_t vlq() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const uint8_t b = u8();
      v = (v << 7) | (b & 0x7F);
      if (!(b & 0x80)) return v;
    }
    throw DataError("SMF: variable-length quantity longer than 4 bytes at offset " + std::to_string(pos_));
  }
  void skip(size_t n) {
    need(n);
    pos_ += n;
  }
  std::string tag() {
    need(4);
    std::string t(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return t;
  }

 private:
  void need(size_t n) const {
    if (remaining() < n) throw DataError("SMF: unexpected end of data at offset " + std::to_string(pos_));
  }

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

void parse_track(std::span<const uint8_t> data, int track_index, std::vector<SmfNote>& notes) {
  Reader r(data);
  int64_t tick = 0;
  uint8_t running = 0;
  // (channel, pitch) -> onsets of sounding notes, first in first out
  std::map<std::pair<int, int>, std::deque<int64_t>> open;

  while (r.remaining() > 0) {
    tick += r.vlq();
    uint8_t status = r.peek();
    if (status & 0x80) {
      r.u8();
    } else {
      if (!running) throw DataError("SMF: data byte without running status in track " + std::to_string(track_index));
      status = running;
    }

    if (status == 0xFF) {
      const uint8_t type = r.u8();
      const uint32_t len = r.vlq();
      r.skip(len);
      running = 0;
      if (type == 0x2F) break;  // end of track
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      r.skip(r.vlq());
      running = 0;
      continue;
    }
    if (status >= 0xF1) throw DataError("SMF: unexpected system message in track " + std::to_string(track_index));

    running = status;
    const int kind = status & 0xF0;
    const int channel = status & 0x0F;
    if (kind == 0xC0 || kind == 0xD0) {
      r.u8();
      continue;
    }
    const uint8_t d1 = r.u8();
    const uint8_t d2 = r.u8();
    if ((d1 | d2) & 0x80) throw DataError("SMF: data byte with high bit set in track " + std::to_string(track_index));
    if (kind == 0x90 && d2 > 0) {
      open[{channel, d1}].push_back(tick);
    } else if (kind == 0x80 || kind == 0x90) {
      auto it = open.find({channel, d1});
      if (it == open.end() || it->second.empty()) continue;  // stray note-off
      const int64_t onset = it->second.front();
      it->second.pop_front();
      if (tick > onset) notes.push_back({d1, onset, tick - onset});
    }
  }
  for (const auto& [key, onsets] : open) {
    if (!onsets.empty()) {
      throw DataError("SMF: dangling note-on (pitch " + std::to_string(key.second) + ", tick " +
                      std::to_string(onsets.front()) + ") in track " + std::to_string(track_index));
    }
  }
}

void put_be(std::vector<uint8_t>& out, uint32_t v, int n) {
  for (int i = n - 1; i >= 0; --i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_vlq(std::vector<uint8_t>& out, uint32_t v) {
  uint8_t buf[5];
  int n = 0;
  buf[n++] = v & 0x7F;
  while (v >>= 7) buf[n++] = static_cast<uint8_t>((v & 0x7F) | 0x80);
  while (n) out.push_back(buf[--n]);
}

// Nearest integer to num / den (den > 0), exact halves rounded down.
int64_t round_half_down(int64_t num, int64_t den) {
  // ceil((2 * num - den) / (2 * den))
  const int64_t a = 2 * num - den;
  const int64_t b = 2 * den;
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

}  // namespace

SmfPiece parse_smf(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  if (r.remaining() < 14 || r.tag() != "MThd") throw DataError("SMF: missing MThd header chunk");
  const uint32_t hlen = r.be(4);
  if (hlen < 6 || hlen > r.remaining()) throw DataError("SMF: malformed header chunk length " + std::to_string(hlen));
  const uint32_t format = r.be(2);
  const uint32_t ntracks = r.be(2);
  const uint32_t division = r.be(2);
  r.skip(hlen - 6);
  if (format == 2) throw DataError("SMF: format 2 is not supported");
  if (format > 2) throw DataError("SMF: unknown format " + std::to_string(format));
  if (division & 0x8000) throw DataError("SMF: SMPTE time division is not supported");
  if (division == 0) throw DataError("SMF: zero ticks per quarter");

  SmfPiece piece;
  piece.ticks_per_quarter = static_cast<int>(division);
  uint32_t seen = 0;
  while (seen < ntracks) {
    if (r.remaining() < 8) throw DataError("SMF: expected " + std::to_string(ntracks) + " tracks, found " + std::to_string(seen));
    const std::string tag = r.tag();
    const uint32_t len = r.be(4);
    if (len > r.remaining()) {
      throw DataError("SMF: malformed chunk length " + std::to_string(len) + " for chunk '" + tag + "'");
    }
    const auto body = bytes.subspan(r.pos(), len);
    r.skip(len);
    if (tag != "MTrk") continue;  // unknown chunks are skipped
    parse_track(body, static_cast<int>(seen), piece.notes);
    ++seen;
  }
  std::sort(piece.notes.begin(), piece.notes.end());
  return piece;
}

SmfPiece read_smf_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open MIDI file " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_smf(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<uint8_t> serialize_smf(const SmfPiece& piece) {
  struct Ev {
    int64_t tick;
    int on;  // 0 = off sorts first
    int pitch;
  };
  std::vector<Ev> evs;
  for (const auto& n : piece.notes) {
    evs.push_back({n.onset, 1, n.pitch});
    evs.push_back({n.onset + n.duration, 0, n.pitch});
  }
  std::stable_sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) {
    if (a.tick != b.tick) return a.tick < b.tick;
    return a.on < b.on;
  });

  std::vector<uint8_t> track;
  int64_t last = 0;
  for (const auto& e : evs) {
    put_vlq(track, static_cast<uint32_t>(e.tick - last));
    last = e.tick;
    track.push_back(e.on ? 0x90 : 0x80);
    track.push_back(static_cast<uint8_t>(e.pitch));
    track.push_back(e.on ? 64 : 0);
  }
  put_vlq(track, 0);
  track.insert(track.end(), {0xFF, 0x2F, 0x00});

  std::vector<uint8_t> out = {'M', 'T', 'h', 'd'};
  put_be(out, 6, 4);
  put_be(out, 0, 2);
  put_be(out, 1, 2);
  put_be(out, static_cast<uint32_t>(piece.ticks_per_quarter), 2);
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  put_be(out, static_cast<uint32_t>(track.size()), 4);
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

std::vector<NoteEvent> quantize(const SmfPiece& piece) {
  if (piece.ticks_per_quarter < 4) throw DataError("quantize: ticks per quarter must be >= 4");
  // grid = onset * 4 / tpq
  const int64_t den = piece.ticks_per_quarter;
  std::vector<NoteEvent> out;
  out.reserve(piece.notes.size());
  for (const auto& n : piece.notes) {
    const int64_t onset = std::max<int64_t>(0, round_half_down(4 * n.onset, den));
    const int64_t dur = std::max<int64_t>(1, round_half_down(4 * n.duration, den));
    out.push_back({n.pitch, onset, dur});
  }
  return out;
}

std::vector<std::vector<NoteEvent>> read_note_jsonl(std::istream& in) {
  std::map<int64_t, std::vector<NoteEvent>> pieces;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      NoteEvent n;
      n.pitch = j.at("pitch").get<int>();
      n.onset = j.at("onset").get<int64_t>();
      n.duration = j.at("duration").get<int64_t>();
      if (n.pitch < 0 || n.pitch > 127 || n.onset < 0 || n.duration < 1) {
        throw DataError("note fields out of range");
      }
      pieces[j.value("piece", int64_t{0})].push_back(n);
    } catch (const std::exception& e) {
      throw DataError("notes JSONL line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::vector<std::vector<NoteEvent>> out;
  for (auto& [id, notes] : pieces) out.push_back(std::move(notes));
  return out;
}

void write_note_jsonl(std::ostream& out, const std::vector<std::vector<NoteEvent>>& pieces) {
  for (size_t p = 0; p < pieces.size(); ++p) {
    for (const auto& n : pieces[p]) {
      out << "{\"piece\":" << p << ",\"pitch\":" << n.pitch << ",\"onset\":" << n.onset
          << ",\"duration\":" << n.duration << "}\n";
    }
  }
}

std::vector<std::vector<NoteEvent>> load_midi_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (entry.is_regular_file() && (ext == ".mid" || ext == ".midi")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::vector<NoteEvent>> out;
  for (const auto& f : files) out.push_back(quantize(read_smf_file(f)));
  return out;
}

}  // namespace musgae

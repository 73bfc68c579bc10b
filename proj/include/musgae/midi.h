// Corpus acquisition: Standard MIDI File (format 0/1) parsing, 1/16-note
// grid quantization, and the JSON-lines note format.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "musgae/pianoroll.h"

namespace musgae {

struct SmfNote {
  int pitch = 0;
  int64_t onset = 0;     // file ticks
  int64_t duration = 0;  // file ticks, > 0

  auto operator<=>(const SmfNote&) const = default;
};

struct SmfPiece {
  int ticks_per_quarter = 480;
  std::vector<SmfNote> notes;  // merged across tracks, sorted

  bool operator==(const SmfPiece&) const = default;
};

// Tempo, meta and SysEx events are skipped; running status is honored.
// Throws DataError on malformed input (bad chunk lengths, truncation,
// dangling note-on, format 2, SMPTE division).
SmfPiece parse_smf(std::span<const uint8_t> bytes);
SmfPiece read_smf_file(const std::filesystem::path& path);

// Format 0 writer (channel 0, velocity 64, explicit status bytes). At equal
// ticks note-offs precede note-ons.
std::vector<uint8_t> serialize_smf(const SmfPiece& piece);

// Onsets and lengths rounded to the nearest 1/16 note, exact halves rounded
// down; durations clamped to >= 1. Throws DataError if tpq < 4.
std::vector<NoteEvent> quantize(const SmfPiece& piece);

// JSON lines, one note per line: {"pitch":60,"onset":0,"duration":2} in grid
// ticks, with an optional integer "piece" field (default 0). Notes are
// grouped by piece id in ascending order. Blank lines are ignored.
std::vector<std::vector<NoteEvent>> read_note_jsonl(std::istream& in);
void write_note_jsonl(std::ostream& out, const std::vector<std::vector<NoteEvent>>& pieces);

// All *.mid / *.midi files of a directory (sorted by file name), quantized.
std::vector<std::vector<NoteEvent>> load_midi_dir(const std::filesystem::path& dir);

}  // namespace musgae

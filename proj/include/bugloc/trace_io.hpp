#ifndef BUGLOC_TRACE_IO_HPP
#define BUGLOC_TRACE_IO_HPP

#include <filesystem>
#include <string>

#include "bugloc/types.hpp"

namespace bugloc {

// Trace file format: UTF-8 CSV, header = counter names then the literal
// column "ipc", one data row per window. Ids and labels live in the manifest.

// Parses and validates one trace file. The returned trace carries only the
// numeric payload; ids/label/window_cycles come from the manifest.
CounterTrace load_trace(const std::filesystem::path& path);

// Canonical writer; load_trace(write_trace(t)) round-trips byte-identically
// for canonical inputs (shortest round-trip decimal formatting).
void write_trace(const CounterTrace& trace, const std::filesystem::path& path);

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Loads every referenced trace, stamps ids/labels, sorts deterministically by
// (arch_id, workload_id, bug_id) and enforces all Dataset invariants.
// Relative trace paths resolve against the manifest's directory.
Dataset load_dataset(const Manifest& manifest,
                     const std::filesystem::path& base_dir = {});
Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace bugloc

#endif

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promptweight/types.hpp"

namespace promptweight {

struct Violation {
    std::string subject;  // offending id or field path
    std::string rule;
    std::string message;
};

std::vector<Violation> validate_prompt_set(const PromptSet& ps);
std::vector<Violation> validate_manifest(const DatasetManifest& ds);
std::vector<Violation> validate_matrix(const ScoreMatrix& m);
std::vector<Violation> validate_weights(std::span<const double> w);
std::vector<Violation> validate_ga_config(const GAConfig& cfg);
std::vector<Violation> validate_recognizer(const Recognizer& r);

/// Throws InvariantError listing every violation when the list is non-empty.
void require_valid(const std::vector<Violation>& violations, std::string_view what);

/// Checks that the matrix columns are exactly the prompt set ids, in order,
/// and that the tasks agree. Throws MismatchError otherwise.
void require_consistent(const ScoreMatrix& m, const PromptSet& ps);

inline constexpr std::string_view kFormatVersion = "1";

// Serialization. `serialize_*` produce UTF-8 JSON; `parse_*` validate the
// result and throw ParseError / VersionError / InvariantError.
std::string serialize(const PromptSet& ps);
std::string serialize(const DatasetManifest& ds);
std::string serialize(const ScoreMatrix& m);
std::string serialize(const Recognizer& r);
std::string serialize(const GAConfig& cfg);

PromptSet parse_prompt_set(std::string_view text);
DatasetManifest parse_manifest(std::string_view text);
ScoreMatrix parse_matrix(std::string_view text);
Recognizer parse_recognizer(std::string_view text);
/// Missing keys take their defaults, so `{}` is the default configuration.
GAConfig parse_ga_config(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

PromptSet load_prompt_set(const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);
ScoreMatrix load_matrix(const std::filesystem::path& path);
Recognizer load_recognizer(const std::filesystem::path& path);
GAConfig load_ga_config(const std::filesystem::path& path);

template <typename T>
void save(const std::filesystem::path& path, const T& value) {
    write_file(path, serialize(value));
}

/// Hex SHA-256 of the canonical serialization of a matrix.
std::string content_hash(const ScoreMatrix& m);

}  // namespace promptweight

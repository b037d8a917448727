#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include <json.hpp>

#include "uqa/records.hpp"

namespace uqa {

inline constexpr int kDumpSchemaVersion = 1;

/// Newline-delimited JSON interchange format, one record per line:
///
///   label_tokens  model fields + labels {label: token_id} + evaluator {best, worst}
///   distribution  model fields + question_id, variant_id, prompt_sha256,
///                 completeness ("FULL" | "TOP_K"), k_reported (TOP_K only),
///                 entries [{token_id, token_text, logprob}]
///   probe         model fields + question_id, variant_id, prompt_sha256,
///                 chosen_label, conditioned_label, p_best, p_worst
///
/// Model fields are model_id, family, param_count, instruct; every record also
/// carries record_type and schema_version. Zero-probability entries store a
/// null logprob. Records are written in canonical order: label_tokens first,
/// then per question the base distribution, variants ascending, the
/// self-report probe and the population probes (variant, then choice).
void write_dump(std::ostream& out, const ModelRecords& records);
void write_dump_file(const std::filesystem::path& path, const ModelRecords& records);

/// Parses and validates a dump. Schema and invariant violations raise
/// ValidationError naming the source and line.
ModelRecords read_dump(std::istream& in, std::string_view source = "<dump>");
ModelRecords read_dump_file(const std::filesystem::path& path);

}  // namespace uqa

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "absplit/assigner.hpp"
#include "absplit/marketsim.hpp"
#include "absplit/types.hpp"

namespace absplit {

// File formats (format version 1). All CSV files carry a header row; money
// columns are integer minor units.
//
//   users            user_id
//   ads              ad_id,budget_minor[,alpha][,feat_<name>...]
//   user assignment  user_id,submarket
//   ads assignment   ad_id,copy,submarket,budget_minor,parent_budget_minor,rand_b_minor[,feat_<name>...]
//   estimation data  ad_id,copy,submarket,budget_minor,rand_b_minor,outcome,treatment[,feat_<name>...]
//   latent sidecar   ad_id,quality_score,quality_multiplier
//   truth sidecar    ad_id,quality_multiplier,slope_control,slope_treatment
//   interactions     JSON lines {"user_id":..,"ad_id":..,"kind":"impression|click|conversion","ts":<epoch ms>}
inline constexpr int kFormatVersion = 1;

struct DatasetPaths {
  std::string users;
  std::string ads;
  std::string interactions;
  std::string user_assignment;
  std::string ads_assignment;
  std::string estimation_output;
};

std::vector<std::string> read_users(const std::string& path);
void write_users(const std::string& path, const std::vector<std::string>& users);

std::vector<Ad> read_ads(const std::string& path);
void write_ads(const std::string& path, const std::vector<Ad>& ads);

std::vector<UserAssignment> read_user_assignment(const std::string& path);
void write_user_assignment(const std::string& path, const std::vector<UserAssignment>& assignments);

std::vector<AdCopy> read_ads_assignment(const std::string& path);
void write_ads_assignment(const std::string& path, const std::vector<AdCopy>& copies);

std::vector<EstimationRow> read_estimation_data(const std::string& path);
void write_estimation_data(const std::string& path, const std::vector<EstimationRow>& rows);

std::vector<AdLatent> read_latent(const std::string& path);
void write_latent(const std::string& path, const std::vector<AdLatent>& latent);

void write_truth(const std::string& path, const std::vector<TruthRow>& truth);
std::vector<TruthRow> read_truth(const std::string& path);

void write_interactions(const std::string& path, const std::vector<Interaction>& interactions);
std::vector<Interaction> read_interactions(const std::string& path);
// Streams the log line by line without materialising it.
void for_each_interaction(const std::string& path, const std::function<void(const Interaction&)>& fn);

std::string format_interaction(const Interaction& interaction);
Interaction parse_interaction(std::string_view line);

struct BuildOptions {
  InteractionKind outcome_kind = InteractionKind::Conversion;
  // Drop and count referential-integrity violations instead of failing.
  bool lenient = false;
};

struct BuildStats {
  std::int64_t interactions_read = 0;
  std::int64_t interactions_counted = 0;
  std::int64_t other_kind = 0;
  std::int64_t orphan_users = 0;
  std::int64_t orphan_ads = 0;
};

struct BuildResult {
  std::vector<EstimationRow> rows;
  BuildStats stats;
};

// Joins interactions with the user assignment (by user) and with the ads
// assignment (by ad and the user's sub-market), counts interactions of the
// requested kind per copy, and emits two rows per ad sorted by
// (ad_id, copy). When `paths.user_assignment` is empty the assignment is
// recomputed from `paths.users` with `config`. Writes
// `paths.estimation_output` when it is non-empty.
BuildResult build_estimation_data(const DatasetPaths& paths, const SplitConfig& config, const BuildOptions& options);

// In-memory form of the same join.
BuildResult build_estimation_data(const std::vector<UserAssignment>& users, const std::vector<AdCopy>& copies,
                                  const std::vector<Interaction>& interactions, const BuildOptions& options);

// Rows from copies and per-copy outcome counts (same order).
std::vector<EstimationRow> to_estimation_rows(const std::vector<AdCopy>& copies,
                                              const std::vector<std::int64_t>& outcomes);

}  // namespace absplit

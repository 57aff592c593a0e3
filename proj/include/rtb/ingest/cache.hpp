#pragma once

#include <filesystem>
#include <string>

#include "rtb/ingest/episode.hpp"

namespace rtb::ingest {

// Columnar binary cache of a campaign: token table plus per-day arrays. The provenance
// text (the resolved run configuration) is stored verbatim and returned on load.
void save_dataset(const std::filesystem::path& path, const CampaignDataset& dataset,
                  const std::string& provenance);

struct LoadedDataset {
  CampaignDataset dataset;
  std::string provenance;
};

LoadedDataset load_dataset(const std::filesystem::path& path);

}  // namespace rtb::ingest

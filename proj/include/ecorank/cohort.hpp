#pragma once

#include <compare>
#include <string>

#include "ecorank/ingest.hpp"
#include "json.hpp"

namespace ecorank {

// Attribute buckets used to define peer groups.
struct BucketSpec {
  int year_width = 20;
  double area_width = 1000.0;  // square feet
  int min_cohort = 20;
};

struct CohortKey {
  PropertyType property_type = PropertyType::SingleFamily;
  int year_bucket = 0;   // floor(year_built / year_width)
  long area_bucket = 0;  // floor(floor_area / area_width)

  auto operator<=>(const CohortKey&) const = default;
  std::string label(const BucketSpec& spec) const;
};

CohortKey cohort_key(const BuildingRecord& b, const BucketSpec& spec);

void to_json(nlohmann::json& j, const BucketSpec& s);
void from_json(const nlohmann::json& j, BucketSpec& s);

}  // namespace ecorank

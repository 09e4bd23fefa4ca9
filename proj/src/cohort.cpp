#include "ecorank/cohort.hpp"

#include <cmath>

namespace ecorank {

CohortKey cohort_key(const BuildingRecord& b, const BucketSpec& spec) {
  CohortKey k;
  k.property_type = b.property_type;
  k.year_bucket = static_cast<int>(std::floor(static_cast<double>(b.year_built) / spec.year_width));
  k.area_bucket = static_cast<long>(std::floor(b.floor_area / spec.area_width));
  return k;
}

std::string CohortKey::label(const BucketSpec& spec) const {
  const int y0 = year_bucket * spec.year_width;
  const double a0 = static_cast<double>(area_bucket) * spec.area_width;
  return std::string(to_string(property_type)) + "/" + std::to_string(y0) + "-" +
         std::to_string(y0 + spec.year_width - 1) + "/" + std::to_string(static_cast<long>(a0)) + "-" +
         std::to_string(static_cast<long>(a0 + spec.area_width)) + "sqft";
}

void to_json(nlohmann::json& j, const BucketSpec& s) {
  j = nlohmann::json{{"year_width", s.year_width}, {"area_width", s.area_width}, {"min_cohort", s.min_cohort}};
}

void from_json(const nlohmann::json& j, BucketSpec& s) {
  s.year_width = j.value("year_width", 20);
  s.area_width = j.value("area_width", 1000.0);
  s.min_cohort = j.value("min_cohort", 20);
}

}  // namespace ecorank

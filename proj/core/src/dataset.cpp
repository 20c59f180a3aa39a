#include "spikestrat/dataset.hpp"

#include <stdexcept>
#include <unordered_map>

namespace spikestrat {

const char* to_string(source_kind s) {
    return s == source_kind::odb ? "odb" : "rct";
}

dataset::dataset(std::vector<subject> subjects, int dims,
                 std::map<std::string, std::string> metadata)
    : subjects_(std::move(subjects)), dims_(dims), metadata_(std::move(metadata)) {
    if (dims_ < 0) throw std::invalid_argument("dataset: negative dimension count");
    // id -> source of first appearance; same-source repeats are resample
    // duplicates, cross-source repeats break ODB/RCT disjointness.
    std::unordered_map<std::string, source_kind> seen;
    seen.reserve(subjects_.size());
    for (const subject& s : subjects_) {
        if (s.id.empty()) throw std::invalid_argument("dataset: empty subject id");
        if (s.w != 0 && s.w != 1) {
            throw std::invalid_argument("dataset: subject " + s.id +
                                        ": w must be 0 or 1, got " + std::to_string(s.w));
        }
        if (static_cast<int>(s.x.size()) != dims_) {
            throw std::invalid_argument("dataset: subject " + s.id + ": expected " +
                                        std::to_string(dims_) + " covariates, got " +
                                        std::to_string(s.x.size()));
        }
        if (s.e && (*s.e <= 0.0 || *s.e >= 1.0)) {
            throw std::invalid_argument("dataset: subject " + s.id +
                                        ": propensity must lie strictly in (0,1)");
        }
        if (s.y_t.has_value() != s.y_c.has_value()) {
            throw std::invalid_argument("dataset: subject " + s.id +
                                        ": potential outcomes must be given as a pair");
        }
        if (s.y_t && s.y_c) {
            double chosen = s.w == 1 ? *s.y_t : *s.y_c;
            if (s.y != chosen) {
                throw std::invalid_argument(
                    "dataset: subject " + s.id +
                    ": observed outcome does not equal the potential outcome selected by w");
            }
        }
        auto [it, inserted] = seen.emplace(s.id, s.source);
        if (!inserted && it->second != s.source) {
            throw std::invalid_argument("dataset: id " + s.id +
                                        " appears in both the ODB and the RCT");
        }
        if (s.source == source_kind::odb) ++n_odb_; else ++n_rct_;
        any_e_ |= s.e.has_value();
        all_e_ &= s.e.has_value();
        any_prog_ |= s.prog.has_value();
        all_prog_ &= s.prog.has_value();
        bool po = s.y_t.has_value();
        any_po_ |= po;
        all_po_ &= po;
    }
    if (subjects_.empty()) {
        all_e_ = all_prog_ = all_po_ = false;
    }
}

}  // namespace spikestrat

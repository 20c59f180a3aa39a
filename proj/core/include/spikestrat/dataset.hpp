#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spikestrat {

enum class source_kind { odb, rct };

const char* to_string(source_kind s);

// One subject. w is the realized treatment, y the observed outcome.
// Potential outcomes y_t/y_c are carried only by simulated data; when both
// are present the observed outcome must equal the one selected by w.
// e is the propensity score (strictly inside (0,1)); prog the prognostic
// score. Ids are opaque strings, unique across the two sources.
struct subject {
    std::string id;
    source_kind source = source_kind::odb;
    int w = 0;
    double y = 0.0;
    std::vector<double> x;
    std::optional<double> y_t;
    std::optional<double> y_c;
    std::optional<double> e;
    std::optional<double> prog;
};

// Immutable subject collection mixing the observational database and the
// trial. Validates per-subject invariants and cross-source id disjointness
// on construction; duplicate ids within one source are allowed so that
// bootstrap resamples remain representable.
class dataset {
public:
    dataset(std::vector<subject> subjects, int dims,
            std::map<std::string, std::string> metadata = {});

    const std::vector<subject>& subjects() const { return subjects_; }
    int dims() const { return dims_; }
    long n_odb() const { return n_odb_; }
    long n_rct() const { return n_rct_; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

    bool all_have_propensity() const { return all_e_; }
    bool any_has_propensity() const { return any_e_; }
    bool all_have_prognostic() const { return all_prog_; }
    bool any_has_prognostic() const { return any_prog_; }
    bool all_have_potential_outcomes() const { return all_po_; }
    bool any_has_potential_outcomes() const { return any_po_; }

private:
    std::vector<subject> subjects_;
    int dims_ = 0;
    long n_odb_ = 0;
    long n_rct_ = 0;
    bool all_e_ = true, any_e_ = false;
    bool all_prog_ = true, any_prog_ = false;
    bool all_po_ = true, any_po_ = false;
    std::map<std::string, std::string> metadata_;
};

// Trial design; p_r is the randomization probability shared by all trial
// subjects.
struct rct_design {
    double p_r = 0.5;
};

}  // namespace spikestrat

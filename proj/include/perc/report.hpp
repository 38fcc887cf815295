#pragma once

#include <string>
#include <vector>

namespace perc {

struct Violation {
    std::string check;    // name of the structural rule that failed, e.g. "mass-rule"
    std::string subject;  // cluster/layer identifier
    std::string detail;
};

struct VerificationReport {
    std::vector<Violation> violations;
    std::vector<std::string> notes;  // non-failing observations (truncations, caps)

    bool ok() const { return violations.empty(); }
    void fail(std::string check, std::string subject, std::string detail) {
        violations.push_back({std::move(check), std::move(subject), std::move(detail)});
    }
    void note(std::string s) { notes.push_back(std::move(s)); }
    void merge(const VerificationReport& o) {
        violations.insert(violations.end(), o.violations.begin(), o.violations.end());
        notes.insert(notes.end(), o.notes.begin(), o.notes.end());
    }
};

}  // namespace perc

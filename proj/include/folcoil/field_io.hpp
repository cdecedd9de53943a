#pragma once

#include "folcoil/field.hpp"
#include "folcoil/forms.hpp"

#include <iosfwd>
#include <string>

namespace folcoil {

/// Binary block: magic "FCF1", u32 dim, u32 resolution per axis,
/// per axis a u32 name length and the name bytes, then the samples as
/// little-endian f64 in row-major order.
void write_field_binary(std::ostream& os, const ScalarField& f);
ScalarField read_field_binary(std::istream& is);

void save_field(const std::string& path, const ScalarField& f);
ScalarField load_field(const std::string& path);

/// One row per grid point: axis coordinates followed by the value.
void write_field_csv(std::ostream& os, const ScalarField& f);

/// Form manifest (JSON, schema "folcoil.form/1") mapping component labels to
/// field blocks stored next to it as <stem>.<label>.fcf. Full-form labels
/// wedge the axis names ("dx^dq1"); tangential labels use leaf slots
/// ("e1^e2"); degree 0 is labelled "1".
void save_form(const std::string& manifest_path, const FullForm& w);
void save_form(const std::string& manifest_path, const TangentialForm& w);
FullForm load_full_form(const std::string& manifest_path);
TangentialForm load_tangential_form(const std::string& manifest_path);

/// Label of one basis component, as used in the manifest.
std::string component_label(const PeriodicGrid& g, bool tangential, const MultiIndex& I);

}  // namespace folcoil

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace lcmi {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using Mat24 = Eigen::Matrix<double, 2, 4>;
using Mat42 = Eigen::Matrix<double, 4, 2>;

enum class Errc {
    InvalidArgument,
    UnknownPreset,
    NonFiniteOde,
    SingularSigma,
    GammaOne,
    BlowUp,
    QSingular,
    QuadratureFail,
    NonpositiveSurplus,
    NonpositiveWealth,
    HorizonExhausted,
    InconsistentSign,
    ExistenceFail,
    SingularInnovation,
    NoConvergence,
    DomainEdge,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::UnknownPreset: return "UnknownPreset";
        case Errc::NonFiniteOde: return "NonFiniteOde";
        case Errc::SingularSigma: return "SingularSigma";
        case Errc::GammaOne: return "GammaOne";
        case Errc::BlowUp: return "BlowUp";
        case Errc::QSingular: return "QSingular";
        case Errc::QuadratureFail: return "QuadratureFail";
        case Errc::NonpositiveSurplus: return "NonpositiveSurplus";
        case Errc::NonpositiveWealth: return "NonpositiveWealth";
        case Errc::HorizonExhausted: return "HorizonExhausted";
        case Errc::InconsistentSign: return "InconsistentSign";
        case Errc::ExistenceFail: return "ExistenceFail";
        case Errc::SingularInnovation: return "SingularInnovation";
        case Errc::NoConvergence: return "NoConvergence";
        case Errc::DomainEdge: return "DomainEdge";
    }
    return "Unknown";
}

// Validation problems are the caller's fault; everything else is numerical.
inline bool is_validation(Errc c) {
    return c == Errc::InvalidArgument || c == Errc::UnknownPreset || c == Errc::GammaOne ||
           c == Errc::DomainEdge || c == Errc::NonpositiveSurplus || c == Errc::NonpositiveWealth ||
           c == Errc::HorizonExhausted || c == Errc::InconsistentSign;
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

inline void require(bool ok, Errc code, const std::string& what) {
    if (!ok) throw Error(code, what);
}

}  // namespace lcmi

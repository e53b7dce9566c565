#pragma once

// Generated by tests/oracle/generate_reference.py (mpmath, 60 digits);
// do not edit by hand.

namespace reference {

inline constexpr double kUnitBallVolume1 = 2.000000000000000000;
inline constexpr double kUnitBallVolume2 = 3.141592653589793238;
inline constexpr double kUnitBallVolume3 = 4.188790204786390985;
inline constexpr double kUnitBallVolume4 = 4.934802200544679309;
inline constexpr double kSphereArea1 = 6.283185307179586477;
inline constexpr double kSphereArea2 = 12.56637061435917295;
inline constexpr double kSphereArea3 = 19.73920880217871724;
inline constexpr double kLambda1 = 1.000000000000000000;
inline constexpr double kLambda2 = 0.7853981633974483096;
inline constexpr double kLambda3 = 0.6666666666666666667;
inline constexpr double kC1 = 1.000000000000000000;
inline constexpr double kC2 = 0.3926990816987241548;
inline constexpr double kC3 = 0.08726646259971647885;
inline constexpr double kDelta1 = 0.5000000000000000000;
inline constexpr double kDelta2 = 0.6366197723675813431;
inline constexpr double kDelta3 = 1.432394487827058022;

struct SpaceformCase { int n; double s; double r; double volume; };
inline constexpr SpaceformCase kSpaceformCases[] = {
    {2, -2, 1.5, 8.497440223784769306},
    {2, -0.5, 0.25, 0.1966053375092241143},
    {2, 2, 1.5, 5.838730360990076211},
    {2, 2, 0.25, 0.1953290151434717954},
    {2, 1e-07, 0.5, 0.7853981625793252231},
    {2, -1e-07, 0.5, 0.7853981642155713968},
    {3, -6, 2.0, 73.16743276921113548},
    {3, -1, 0.75, 1.800577237908929740},
    {3, 6, 1.0, 3.426543191135922277},
    {3, 6, 0.25, 0.06463657677260265764},
    {3, 1e-07, 0.5, 0.5235987751619665603},
    {3, -1e-07, 0.5, 0.5235987760346311862},
};

struct GrowthNearCase { int n; double kappa; double mu0; double r; double bound; };
inline constexpr GrowthNearCase kGrowthNearCases[] = {
    {2, 1.0, 0.25, 2.0, 0.04200143637880212305},
    {2, 2.0, 0.1, 4.0, 0.2217520333431290656},
    {3, 1.5, 0.5, 6.0, 0.009834702341597630934},
};

struct GrowthFarCase { int n; double kappa; double r; double bound; };
inline constexpr GrowthFarCase kGrowthFarCases[] = {
    {2, 1.0, 2.0, 0.01570796326794896619},
    {2, 2.0, 4.0, 0.01570796326794896619},
    {3, 1.5, 6.0, 0.005585053606381854646},
};

struct GrowthSmallCase { int n; double C; double r; double margulis_bound; double short_bound; };
inline constexpr GrowthSmallCase kGrowthSmallCases[] = {
    {2, 0.5, 0.8, 1.545112856963836245, 0.5907205498306116934},
    {3, 1.0, 0.6, 3.644431139969247529, 1.249587891487543332},
};

struct TreeBallCase { double r; double measure; };
inline constexpr TreeBallCase kTreeBallCases[] = {
    {0.5, 2.000000000000000000},
    {1.0, 4.000000000000000000},
    {2.5, 34.00000000000000000},
    {4.5, 322.0000000000000000},
};

}  // namespace reference

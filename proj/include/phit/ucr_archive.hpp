#pragma once

#include <sstream>
#include <string_view>
#include <vector>

#include "phit/data.hpp"

namespace phit::ucr {

// Mirrors data/ucr_domains.tsv; a unit test keeps the two identical.
inline constexpr std::string_view kDomainMapText = R"tsv(# UCR 2018 archive: dataset<TAB>type
ACSF1	Devices
Adiac	Images
AllGestureWiimoteX	Sensors
AllGestureWiimoteY	Sensors
AllGestureWiimoteZ	Sensors
ArrowHead	Images
BME	Simulation
Beef	Spectrogram
BeetleFly	Images
BirdChicken	Images
CBF	Simulation
Car	Sensors
Chinatown	Traffic
ChlorineConcentration	Sensors
CinCECGTorso	ECG
Coffee	Spectrogram
Computers	Devices
CricketX	Motion
CricketY	Motion
CricketZ	Motion
Crop	Images
DiatomSizeReduction	Images
DistalPhalanxOutlineAgeGroup	Images
DistalPhalanxOutlineCorrect	Images
DistalPhalanxTW	Images
DodgerLoopDay	Sensors
DodgerLoopGame	Sensors
DodgerLoopWeekend	Sensors
ECG200	ECG
ECG5000	ECG
ECGFiveDays	ECG
EOGHorizontalSignal	EOG
EOGVerticalSignal	EOG
Earthquakes	Sensors
ElectricDevices	Devices
EthanolLevel	Spectrogram
FaceAll	Images
FaceFour	Images
FacesUCR	Images
FiftyWords	Images
Fish	Images
FordA	Sensors
FordB	Sensors
FreezerRegularTrain	Sensors
FreezerSmallTrain	Sensors
Fungi	HRM
GestureMidAirD1	Trajectory
GestureMidAirD2	Trajectory
GestureMidAirD3	Trajectory
GesturePebbleZ1	Sensors
GesturePebbleZ2	Sensors
GunPoint	Motion
GunPointAgeSpan	Motion
GunPointMaleVersusFemale	Motion
GunPointOldVersusYoung	Motion
Ham	Spectrogram
HandOutlines	Images
Haptics	Motion
Herring	Images
HouseTwenty	Devices
InlineSkate	Motion
InsectEPGRegularTrain	EPG
InsectEPGSmallTrain	EPG
InsectWingbeatSound	Sensors
ItalyPowerDemand	Sensors
LargeKitchenAppliances	Devices
Lightning2	Sensors
Lightning7	Sensors
Mallat	Simulation
Meat	Spectrogram
MedicalImages	Images
MelbournePedestrian	Traffic
MiddlePhalanxOutlineAgeGroup	Images
MiddlePhalanxOutlineCorrect	Images
MiddlePhalanxTW	Images
MixedShapesRegularTrain	Images
MixedShapesSmallTrain	Images
MoteStrain	Sensors
NonInvasiveFetalECGThorax1	ECG
NonInvasiveFetalECGThorax2	ECG
OSULeaf	Images
OliveOil	Spectrogram
PLAID	Devices
PhalangesOutlinesCorrect	Images
Phoneme	Sensors
PickupGestureWiimoteZ	Sensors
PigAirwayPressure	Hemodynamics
PigArtPressure	Hemodynamics
PigCVP	Hemodynamics
Plane	Sensors
PowerCons	Power
ProximalPhalanxOutlineAgeGroup	Images
ProximalPhalanxOutlineCorrect	Images
ProximalPhalanxTW	Images
RefrigerationDevices	Devices
Rock	Spectrogram
ScreenType	Devices
SemgHandGenderCh2	Spectrogram
SemgHandMovementCh2	Spectrogram
SemgHandSubjectCh2	Spectrogram
ShakeGestureWiimoteZ	Sensors
ShapeletSim	Simulation
ShapesAll	Images
SmallKitchenAppliances	Devices
SmoothSubspace	Simulation
SonyAIBORobotSurface1	Sensors
SonyAIBORobotSurface2	Sensors
StarLightCurves	Sensors
Strawberry	Spectrogram
SwedishLeaf	Images
Symbols	Images
SyntheticControl	Simulation
ToeSegmentation1	Motion
ToeSegmentation2	Motion
Trace	Sensors
TwoLeadECG	ECG
TwoPatterns	Simulation
UMD	Simulation
UWaveGestureLibraryAll	Motion
UWaveGestureLibraryX	Motion
UWaveGestureLibraryY	Motion
UWaveGestureLibraryZ	Motion
Wafer	Sensors
Wine	Spectrogram
WordSynonyms	Images
Worms	Motion
WormsTwoClass	Motion
Yoga	Images
)tsv";

// Mirrors data/ucr_exclusions.tsv.
inline constexpr std::string_view kExclusionText = R"tsv(# dataset<TAB>reason for leaving it out of the pretext study
EOGHorizontalSignal	two channels of one multivariate recording split into two univariate datasets
EOGVerticalSignal	two channels of one multivariate recording split into two univariate datasets
InsectEPGRegularTrain	same test set with a different train size; combining the train sets beats a pretext task
InsectEPGSmallTrain	same test set with a different train size; combining the train sets beats a pretext task
PigAirwayPressure	unclear correlation between the three hemodynamics datasets
PigArtPressure	unclear correlation between the three hemodynamics datasets
PigCVP	unclear correlation between the three hemodynamics datasets
Fungi	only dataset of its type
DistalPhalanxOutlineAgeGroup	same samples as DistalPhalanxTW with another labelling and split
DistalPhalanxOutlineCorrect	same samples as DistalPhalanxTW with another labelling and split
FaceAll	same as FacesUCR with a different split
FiftyWords	same as WordSynonyms with more classes
MiddlePhalanxOutlineAgeGroup	same samples as MiddlePhalanxTW with another labelling and split
MiddlePhalanxOutlineCorrect	same samples as MiddlePhalanxTW with another labelling and split
ProximalPhalanxOutlineAgeGroup	same samples as ProximalPhalanxTW with another labelling and split
ProximalPhalanxOutlineCorrect	same samples as ProximalPhalanxTW with another labelling and split
MixedShapesRegularTrain	larger-train version of MixedShapesSmallTrain
GunPoint	superseded by GunPointAgeSpan
WormsTwoClass	same as Worms with fewer classes
GunPointMaleVersusFemale	same series as GunPointAgeSpan with a different split
GunPointOldVersusYoung	same series as GunPointAgeSpan with a different split
PowerCons	only dataset of its type
AllGestureWiimoteX	variable length
AllGestureWiimoteY	variable length
AllGestureWiimoteZ	variable length
DodgerLoopDay	same series with different splits and many missing values
DodgerLoopGame	same series with different splits and many missing values
DodgerLoopWeekend	same series with different splits and many missing values
FreezerRegularTrain	larger-train version of FreezerSmallTrain
GesturePebbleZ1	variable length
GesturePebbleZ2	variable length
PickupGestureWiimoteZ	variable length
ShakeGestureWiimoteZ	variable length
Rock	not a time series
SemgHandGenderCh2	same series with different splits; keeping one leaves a single dataset
SemgHandMovementCh2	same series with different splits; keeping one leaves a single dataset
SemgHandSubjectCh2	same series with different splits; keeping one leaves a single dataset
GestureMidAirD1	variable length; three axes of one multivariate recording
GestureMidAirD2	variable length; three axes of one multivariate recording
GestureMidAirD3	variable length; three axes of one multivariate recording
)tsv";

inline constexpr std::size_t kArchiveSize = 128;

inline std::vector<ArchiveEntry> default_domain_map() {
  std::istringstream in{std::string(kDomainMapText)};
  return parse_domain_map(in);
}

inline ExclusionManifest default_exclusions() {
  std::istringstream in{std::string(kExclusionText)};
  return parse_exclusion_manifest(in);
}

/// The study archive: the domain map minus the exclusions, resolved to domains.
inline std::vector<DomainEntry> default_study_archive() {
  return resolve_domains(filter_archive(default_domain_map(), default_exclusions()));
}

}  // namespace phit::ucr

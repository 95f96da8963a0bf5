#pragma once

#include "qdsb/anchors.hpp"
#include "qdsb/bridge.hpp"
#include "qdsb/coupling.hpp"
#include "qdsb/datasets.hpp"
#include "qdsb/evaluate.hpp"
#include "qdsb/model.hpp"
#include "qdsb/point_cloud.hpp"
#include "qdsb/rng.hpp"
#include "qdsb/simulate.hpp"
#include "qdsb/trainer.hpp"
#include "qdsb/transport.hpp"
#include "qdsb/verify.hpp"

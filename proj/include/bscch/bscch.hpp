#pragma once

#include "bscch/assembly.hpp"
#include "bscch/common.hpp"
#include "bscch/config.hpp"
#include "bscch/diagnostics.hpp"
#include "bscch/elliptic.hpp"
#include "bscch/error.hpp"
#include "bscch/experiments.hpp"
#include "bscch/io.hpp"
#include "bscch/mesh.hpp"
#include "bscch/model.hpp"
#include "bscch/potentials.hpp"
#include "bscch/stepper.hpp"

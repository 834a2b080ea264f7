#pragma once

#include "aoi/error.hpp"
#include "aoi/markov.hpp"
#include "aoi/matrix.hpp"
#include "aoi/meanfield.hpp"
#include "aoi/optimizer.hpp"
#include "aoi/parallel.hpp"
#include "aoi/protocol.hpp"
#include "aoi/protocol_io.hpp"
#include "aoi/report.hpp"
#include "aoi/simulator.hpp"

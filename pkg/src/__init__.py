# SleepFS Source Module

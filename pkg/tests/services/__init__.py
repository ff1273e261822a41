# Service tests package
